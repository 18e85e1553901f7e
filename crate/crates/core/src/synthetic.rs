//! Seeded generators for test data, benchmarks and demo fixtures.
//!
//! Everything here is driven by a `u64` seed through ChaCha8, so the same
//! seed yields the same data on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calibration::{ObservationKind, ObservationSeries};
use crate::diffusion::BassParams;
use crate::path_network::{expand_path, MilpInstance, OriginRule, PathNetwork, PathNode, Site, TravelPath};
use crate::Result;

/// Small instance for oracle comparisons: `sites` candidates on a shared
/// line, each path visiting an increasing subset of them.
pub fn random_instance(seed: u64, max_sites: usize, max_paths: usize) -> MilpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(max_sites.clamp(1, 2)..=max_sites.max(1));
    let positions: Vec<f64> = {
        let mut at = 0.0;
        (0..n)
            .map(|_| {
                at += rng.gen_range(10..=45) as f64;
                at
            })
            .collect()
    };
    let range_km = rng.gen_range(80..=160) as f64;
    let sites: Vec<Site> = (0..n)
        .map(|i| Site {
            label: format!("s{i}"),
            cell: None,
            cost: rng.gen_range(1..=5) as f64,
            capacity: 0.0,
        })
        .collect();

    let k = rng.gen_range(1..=max_paths.max(1));
    let mut paths = Vec::with_capacity(k);
    for p in 0..k {
        let mut visits: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
        if visits.is_empty() {
            visits.push(rng.gen_range(0..n));
        }
        let start = positions[visits[0]] - rng.gen_range(5..=35) as f64;
        let end = positions[*visits.last().unwrap()] + rng.gen_range(5..=35) as f64;
        let mut nodes = vec![node(&format!("o{p}"), start, 0.0)];
        nodes.extend(
            visits
                .iter()
                .map(|&i| node(&sites[i].label, positions[i], positions[i] - start)),
        );
        nodes.push(node(&format!("d{p}"), end, end - start));
        let flow = rng.gen_range(1..=100) as f64;
        let path = TravelPath::new(format!("p{p}"), nodes, flow).expect("increasing positions");
        let rule = if rng.gen_bool(0.5) {
            OriginRule::HalfOrigin
        } else {
            OriginRule::HalfFirstStation
        };
        let network = expand_path(&path, range_km, rule).expect("positive range");
        paths.push(PathNetwork {
            network,
            stop_sites: visits,
        });
    }
    let total: f64 = paths.iter().map(|p| p.network.flow).sum();
    let uncapacitated = rng.gen_bool(0.25);
    let sites = sites
        .into_iter()
        .map(|s| Site {
            capacity: if uncapacitated {
                total
            } else {
                rng.gen_range(0.35..1.35f64) * total
            },
            ..s
        })
        .collect();
    let budget = if rng.gen_bool(0.3) { rng.gen_range(0..=n) } else { n };
    MilpInstance::new(sites, paths, budget, uncapacitated).expect("generated instance is consistent")
}

fn node(id: &str, x: f64, cum: f64) -> PathNode {
    PathNode {
        node_id: id.to_string(),
        x,
        y: 0.0,
        cum_dist_km: cum,
    }
}

/// Layout of a synthetic intercity network.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorSpec {
    pub hubs: usize,
    pub paths: usize,
    /// Side of the square study area.
    pub extent_km: f64,
    /// Spacing between consecutive path nodes.
    pub spacing_km: (f64, f64),
    /// Sideways wander of intermediate nodes.
    pub jitter_km: f64,
    pub flow_per_week: (f64, f64),
    /// Hub pairs closer than this carry no path.
    pub min_length_km: f64,
}

impl Default for CorridorSpec {
    fn default() -> Self {
        Self {
            hubs: 5,
            paths: 6,
            extent_km: 400.0,
            spacing_km: (25.0, 45.0),
            jitter_km: 6.0,
            flow_per_week: (20.0, 120.0),
            min_length_km: 180.0,
        }
    }
}

/// Hub-to-hub travel paths; paths between the same hubs share a corridor.
pub fn corridor_paths(seed: u64, spec: &CorridorSpec) -> Vec<TravelPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hubs: Vec<(f64, f64)> = (0..spec.hubs.max(2))
        .map(|_| (rng.gen_range(0.0..spec.extent_km), rng.gen_range(0.0..spec.extent_km)))
        .collect();
    let mut pairs: Vec<(usize, usize)> = (0..hubs.len())
        .flat_map(|a| (0..hubs.len()).filter(move |&b| b != a).map(move |b| (a, b)))
        .filter(|&(a, b)| dist(hubs[a], hubs[b]) >= spec.min_length_km)
        .collect();
    if pairs.is_empty() {
        return Vec::new();
    }
    pairs.shuffle(&mut rng);
    (0..spec.paths)
        .map(|p| {
            let (a, b) = pairs[p % pairs.len()];
            let (from, to) = (hubs[a], hubs[b]);
            let length = dist(from, to);
            let (ux, uy) = ((to.0 - from.0) / length, (to.1 - from.1) / length);
            let mut nodes = vec![PathNode {
                node_id: format!("h{a}"),
                x: from.0,
                y: from.1,
                cum_dist_km: 0.0,
            }];
            let mut along = 0.0;
            let mut prev = from;
            let mut cum = 0.0;
            let mut k = 0;
            loop {
                along += rng.gen_range(spec.spacing_km.0..spec.spacing_km.1);
                let last = along >= length - spec.spacing_km.0 * 0.5;
                let point = if last {
                    to
                } else {
                    let off = rng.gen_range(-spec.jitter_km..=spec.jitter_km);
                    (from.0 + ux * along - uy * off, from.1 + uy * along + ux * off)
                };
                cum += dist(prev, point);
                prev = point;
                let node_id = if last { format!("h{b}") } else { format!("p{p}n{k}") };
                nodes.push(PathNode {
                    node_id,
                    x: point.0,
                    y: point.1,
                    cum_dist_km: cum,
                });
                k += 1;
                if last {
                    break;
                }
            }
            let flow = rng.gen_range(spec.flow_per_week.0..spec.flow_per_week.1).round();
            TravelPath::new(format!("p{p}"), nodes, flow).expect("distances increase")
        })
        .collect()
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Yearly cumulative observations of a Bass curve with multiplicative
/// Gaussian noise of relative size `noise` (`0` for exact data).
pub fn bass_observations(
    seed: u64,
    bass: &BassParams,
    kind: ObservationKind,
    years: std::ops::RangeInclusive<i32>,
    noise: f64,
) -> Result<ObservationSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for year in years {
        let t = year as f64;
        let exact = bass.cumulative_adoption(bass.years_since_origin(t))?;
        let eps = if noise > 0.0 { gaussian(&mut rng) * noise } else { 0.0 };
        pairs.push((t, exact * (1.0 + eps)));
    }
    ObservationSeries::from_pairs(kind, &pairs)
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream easy to reason about
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
