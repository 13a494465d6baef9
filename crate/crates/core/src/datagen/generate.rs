use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hin::{GraphParts, HinGraph, SparseAdj};
use crate::numerics::{xavier_uniform, Matrix};
use crate::rng;

use super::spec::{GenSpec, RelationSpec};

/// A generated graph together with the hidden classes used to wire it.
#[derive(Clone, Debug)]
pub struct Generated {
    pub graph: HinGraph,
    /// Class of every object of the anchor type: object `i` has `i % n_classes`.
    pub anchor_classes: Vec<usize>,
    /// Hidden class per object for each type on the planted path.
    pub latent: Vec<Option<Vec<usize>>>,
}

/// `n × dim` Xavier-uniform features from the features stream of `seed`.
pub fn random_features(n: usize, dim: usize, seed: u64) -> Matrix {
    xavier_uniform(n, dim, &mut rng::stream(seed, rng::ids::FEATURES))
}

/// Draws one degree per owner object. `cap` is the number of available
/// partners. With `links` set the degrees sum to exactly that many.
pub fn power_law_degrees<R: Rng + ?Sized>(
    n: usize,
    spec: &RelationSpec,
    cap: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let min = spec.min_degree;
    let max = spec.max_degree.unwrap_or(cap).min(cap);
    let pair = format!("{}-{}", spec.owner, spec.other);
    if min > max {
        return Err(Error::Config(format!(
            "{pair}: min degree {min} needs more than the {cap} available partners"
        )));
    }
    let pareto = |rng: &mut R, alpha: f64| {
        let u: f64 = 1.0 - rng.random::<f64>();
        u.powf(-1.0 / (alpha - 1.0))
    };
    let Some(links) = spec.links else {
        return Ok((0..n)
            .map(|_| match spec.exponent {
                None => rng.random_range(min..=max),
                Some(alpha) => {
                    let x_min = min.max(1) as f64;
                    let d = (x_min * pareto(rng, alpha)).floor() as usize - usize::from(min == 0);
                    d.clamp(min, max)
                }
            })
            .collect());
    };
    if links < n * min || links > n * max {
        return Err(Error::Config(format!(
            "{pair}: {links} links cannot be spread over {n} objects with degrees in [{min}, {max}]"
        )));
    }
    let alpha = spec.exponent.unwrap_or(f64::INFINITY);
    let weights: Vec<f64> = (0..n)
        .map(|_| {
            if alpha.is_finite() {
                pareto(rng, alpha)
            } else {
                1.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let spare = (links - n * min) as f64;
    let real: Vec<f64> = weights
        .iter()
        .map(|w| min as f64 + spare * w / total)
        .collect();
    let mut deg: Vec<usize> = real.iter().map(|r| (r.floor() as usize).min(max)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| (real[b] - real[b].floor()).total_cmp(&(real[a] - real[a].floor())));
    let mut deficit = links - deg.iter().sum::<usize>();
    while deficit > 0 {
        for &i in &order {
            if deficit == 0 {
                break;
            }
            if deg[i] < max {
                deg[i] += 1;
                deficit -= 1;
            }
        }
    }
    Ok(deg)
}

pub fn generate(spec: &GenSpec) -> Result<HinGraph> {
    generate_with_truth(spec).map(|g| g.graph)
}

/// Picks `k` distinct entries of `pool`, skipping `exclude`.
fn pick<R: Rng + ?Sized>(
    pool: &[usize],
    k: usize,
    exclude: Option<usize>,
    rng: &mut R,
) -> Vec<usize> {
    match exclude.and_then(|e| pool.iter().position(|&p| p == e)) {
        Some(pos) => sample(rng, pool.len() - 1, k)
            .into_iter()
            .map(|i| pool[if i >= pos { i + 1 } else { i }])
            .collect(),
        None => sample(rng, pool.len(), k)
            .into_iter()
            .map(|i| pool[i])
            .collect(),
    }
}

/// Builds the graph: anchor objects get round-robin classes, other planted
/// types random hidden classes; planted hops link to same-class partners
/// (the last hop with a capped off-class share), everything else links
/// uniformly. The label of a labeled object is the majority anchor class
/// over its planted path instances, flipped with probability `noise`.
pub fn generate_with_truth(spec: &GenSpec) -> Result<Generated> {
    let r = spec.resolve()?;
    let schema = &r.schema;
    let k = spec.n_classes;
    let n_types = schema.n_types();
    let mut rng = rng::stream(spec.seed, rng::ids::GRAPH);

    let mut latent: Vec<Option<Vec<usize>>> = vec![None; n_types];
    let anchor = r.planted[0];
    let anchor_classes: Vec<usize> = (0..r.counts[anchor]).map(|i| i % k).collect();
    latent[anchor] = Some(anchor_classes.clone());
    for &t in &r.planted[1..] {
        latent[t] = Some((0..r.counts[t]).map(|_| rng.random_range(0..k)).collect());
    }
    let members = |t: usize, latent: &[Option<Vec<usize>>]| -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); k];
        if let Some(l) = &latent[t] {
            for (i, &c) in l.iter().enumerate() {
                m[c].push(i);
            }
        }
        m
    };

    let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); schema.relations().len()];
    let last_hop = r.planted_rel.len() - 1;
    for (s, &(o, x, fwd, back)) in r.relations.iter().enumerate() {
        let rs = &spec.relations[s];
        let self_rel = o == x;
        let cap = r.counts[x] - usize::from(self_rel);
        let degrees = power_law_degrees(r.counts[o], rs, cap, &mut rng)?;
        let hop = r.planted_rel.iter().position(|&p| p == s);
        let all: Vec<usize> = (0..r.counts[x]).collect();
        let pools = members(x, &latent);
        for (i, &d) in degrees.iter().enumerate() {
            let partners = match hop {
                None => pick(&all, d, self_rel.then_some(i), &mut rng),
                Some(h) => {
                    let c = latent[o].as_ref().expect("planted type has classes")[i];
                    let same = &pools[c];
                    if same.is_empty() {
                        return Err(Error::Config(format!(
                            "{}: no {} object of class {c} to link to",
                            rs.owner, rs.other
                        )));
                    }
                    let mut off = 0;
                    if h == last_hop {
                        off = (0..d).filter(|_| rng.random::<f64>() < spec.mix).count();
                        off = off
                            .min((d.saturating_sub(1)) / 2)
                            .min(r.counts[x] - same.len());
                    }
                    let on = (d - off).min(same.len());
                    let mut p = pick(same, on, None, &mut rng);
                    if off > 0 {
                        let others: Vec<usize> = (0..r.counts[x])
                            .filter(|j| latent[x].as_ref().unwrap()[*j] != c)
                            .collect();
                        p.extend(pick(&others, off, None, &mut rng));
                    }
                    p
                }
            };
            for j in partners {
                triplets[fwd].push((i, j, 1.0));
                triplets[back].push((j, i, 1.0));
            }
        }
    }
    let adjacency = schema
        .relations()
        .iter()
        .zip(&triplets)
        .map(|(&(src, dst), t)| {
            SparseAdj::from_triplets(r.counts[dst], r.counts[src], t.iter().copied())
        })
        .collect::<Result<Vec<_>>>()?;

    // Anchor-class counts over planted path instances, hop by hop.
    let mut votes: Vec<Vec<f64>> = anchor_classes
        .iter()
        .map(|&c| (0..k).map(|j| f64::from(u8::from(j == c))).collect())
        .collect();
    for w in r.planted.windows(2) {
        let rel = schema
            .relation_id(w[0], w[1])
            .expect("planted hop is a relation");
        let a = &adjacency[rel];
        votes = (0..a.n_rows())
            .map(|i| {
                let mut v = vec![0.0; k];
                let (cols, vals) = a.row(i);
                for (&j, &x) in cols.iter().zip(vals) {
                    v.iter_mut().zip(&votes[j]).for_each(|(a, b)| *a += x * b);
                }
                v
            })
            .collect();
    }
    let labeled = *r.planted.last().expect("planted path is non-empty");
    let hidden = latent[labeled].as_ref().expect("labeled type has classes");
    let labels: Vec<Option<usize>> = votes
        .iter()
        .zip(hidden)
        .map(|(v, &h)| {
            let best = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut y = if v[h] == best {
                h
            } else {
                v.iter().position(|&x| x == best).unwrap_or(h)
            };
            if rng.random::<f64>() < spec.noise {
                y = (y + rng.random_range(1..k)) % k;
            }
            Some(y)
        })
        .collect();

    let features = (0..n_types)
        .map(|t| {
            let mut f = xavier_uniform(
                r.counts[t],
                spec.feature_dim,
                &mut rng::stream(spec.seed, rng::ids::FEATURES + t as u64),
            );
            if spec.informative_features && t == labeled {
                for (i, y) in labels.iter().enumerate() {
                    let col = y.unwrap_or(0) % spec.feature_dim;
                    f.set(i, col, f.get(i, col) + 1.0);
                }
            }
            f
        })
        .collect();
    let mut parts = GraphParts::unlabeled(schema.clone(), adjacency, features);
    parts.labels[labeled] = Some(labels);
    parts.class_counts[labeled] = k;
    Ok(Generated {
        graph: HinGraph::validated(parts)?,
        anchor_classes,
        latent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_link_totals() {
        let spec = RelationSpec {
            links: Some(1000),
            ..RelationSpec::power_law("A", "P", 1, 2.5)
        };
        let d = power_law_degrees(300, &spec, 50, &mut rng::stream(1, 1)).unwrap();
        assert_eq!(d.iter().sum::<usize>(), 1000);
        assert!(d.iter().all(|&x| (1..=50).contains(&x)));
        assert!(power_law_degrees(30, &spec, 20, &mut rng::stream(1, 1)).is_err());
    }

    #[test]
    fn iid_degrees_are_heavy_tailed() {
        let spec = RelationSpec::power_law("A", "P", 1, 2.5);
        let d = power_law_degrees(20000, &spec, 10000, &mut rng::stream(2, 1)).unwrap();
        let ones = d.iter().filter(|&&x| x == 1).count() as f64 / d.len() as f64;
        // P(d = 1) = 1 - 2^{-1.5}
        assert!((ones - (1.0 - 2f64.powf(-1.5))).abs() < 0.02, "{ones}");
        assert!(d.iter().max().unwrap() > &30);
    }

    #[test]
    fn pick_skips_excluded() {
        let pool: Vec<usize> = (0..5).collect();
        for s in 0..20 {
            let p = pick(&pool, 4, Some(2), &mut rng::stream(s, 0));
            assert!(!p.contains(&2));
            assert_eq!(p.len(), 4);
        }
    }
}
