//! Workloads shared by the benchmarks.

use evplan_core::calibration::{ObservationKind, ObservationSeries};
use evplan_core::milp::{LinearProgram, RowSense};
use evplan_core::path_network::{
    assemble_instance, expand_paths, filter_by_range, snap_to_grid, CapacitySpec, CostSpec, GridSpec, MilpInstance,
    OriginRule, RangeMode, TravelPath,
};
use evplan_core::synthetic::{bass_observations, corridor_paths, CorridorSpec};
use evplan_core::BassParams;

pub const RANGE_KM: f64 = 150.0;

/// Corridor paths long enough to need a station.
pub fn corridor(seed: u64, paths: usize) -> Vec<TravelPath> {
    let spec = CorridorSpec {
        paths,
        ..CorridorSpec::default()
    };
    filter_by_range(&corridor_paths(seed, &spec), RANGE_KM, RangeMode::StrictGt).expect("positive range")
}

/// Siting instance on a `grid` x `grid` raster with optional weekly capacity.
pub fn corridor_instance(seed: u64, paths: usize, grid: u32, capacity: Option<f64>) -> MilpInstance {
    let paths = corridor(seed, paths);
    let snap =
        snap_to_grid(&paths, &GridSpec::covering(&paths, grid, grid).expect("paths present")).expect("valid grid");
    let nets = expand_paths(&paths, RANGE_KM, OriginRule::HalfOrigin).expect("positive range");
    let cap = capacity.map_or(CapacitySpec::Uncapacitated, CapacitySpec::PerWeek);
    assemble_instance(nets, &snap, &CostSpec::Uniform(1.0), &cap, usize::MAX).expect("consistent instance")
}

/// Transportation LP with `supply` sources and `demand` sinks; costs and
/// quantities come from a fixed integer hash so no RNG is involved.
pub fn transport_lp(supply: usize, demand: usize) -> LinearProgram {
    let h = |a: usize, b: usize| ((a * 7919 + b * 104_729 + 13) % 97) as f64;
    let mut lp = LinearProgram::new();
    let x: Vec<Vec<usize>> = (0..supply)
        .map(|i| {
            (0..demand)
                .map(|j| lp.add_var(1.0 + h(i, j), 0.0, f64::INFINITY))
                .collect()
        })
        .collect();
    let need: Vec<f64> = (0..demand).map(|j| 10.0 + h(j, 1)).collect();
    let total: f64 = need.iter().sum();
    for row in &x {
        let coefs: Vec<(usize, f64)> = row.iter().map(|&c| (c, 1.0)).collect();
        lp.add_row(&coefs, RowSense::Le, 1.2 * total / supply as f64);
    }
    for (j, &d) in need.iter().enumerate() {
        let coefs: Vec<(usize, f64)> = x.iter().map(|row| (row[j], 1.0)).collect();
        lp.add_row(&coefs, RowSense::Ge, d);
    }
    lp
}

/// Twenty yearly adoption counts with 1% noise.
pub fn demand_series() -> ObservationSeries {
    let truth = BassParams::new(0.01, 0.4, 20_000.0, 2010.0).expect("valid parameters");
    bass_observations(17, &truth, ObservationKind::Demand, 2010..=2029, 0.01).expect("positive data")
}
