use std::collections::BTreeSet;
use std::path::Path;

use evplan_core::path_network::*;
use evplan_core::synthetic::{corridor_paths, CorridorSpec};
use proptest::prelude::*;

fn fixture(name: &str) -> LoadedPaths {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    load_paths_from_files(&dir.join("path_nodes.csv"), &dir.join("path_meta.csv")).unwrap()
}

#[test]
fn bundled_fixtures_load_cleanly() {
    let four_stations = fixture("four_stations");
    assert!(four_stations.diagnostics.is_empty());
    assert_eq!(four_stations.paths.len(), 1);
    assert_eq!(four_stations.paths[0].length_km(), 130.0);
    assert_eq!(four_stations.paths[0].flow, 80.0);

    let demo = fixture("demo");
    assert!(demo.diagnostics.is_empty(), "{:?}", demo.diagnostics);
    assert_eq!(demo.paths.len(), 6);
}

#[test]
fn bad_rows_reject_only_their_path() {
    let nodes = "path_id,seq,node_id,x,y,cum_dist_km\n\
                 a,0,o,0,0,0\na,1,s,1,0,40\na,2,d,2,0,80\n\
                 b,0,o,0,0,0\nb,1,s,1,0,oops\nb,2,d,2,0,80\n\
                 c,0,o,0,0,0\nc,1,d,1,0,50\n";
    let meta = "path_id,flow_per_week\na,10\nb,5\n";
    let loaded = load_paths(nodes.as_bytes(), meta.as_bytes(), "nodes", "meta").unwrap();
    let kept: Vec<&str> = loaded.paths.iter().map(|p| p.id.as_str()).collect();
    assert_eq!(kept, ["a"]);
    let rejected: BTreeSet<(&str, usize)> = loaded
        .diagnostics
        .iter()
        .map(|d| (d.path_id.as_str(), d.line))
        .collect();
    assert!(rejected.contains(&("b", 6)), "{:?}", loaded.diagnostics);
    assert!(rejected.iter().any(|&(p, _)| p == "c"), "path without flow is reported");
}

#[test]
fn wrong_header_is_a_hard_error() {
    let err = load_paths(
        "path,seq\n".as_bytes(),
        "path_id,flow_per_week\n".as_bytes(),
        "nodes",
        "meta",
    )
    .unwrap_err();
    assert!(err.to_string().contains("nodes:1"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn arcs_respect_range_and_direction(seed in any::<u64>(), range in 60.0f64..200.0) {
        for path in corridor_paths(seed, &CorridorSpec::default()) {
            for rule in [OriginRule::HalfOrigin, OriginRule::HalfFirstStation] {
                let net = expand_path(&path, range, rule).unwrap();
                prop_assert!(net.rule_violations().is_empty());
                for arc in &net.arcs {
                    prop_assert!(arc.dist_km > 0.0);
                    if matches!((arc.from, arc.to), (NodeRef::Stop(_), NodeRef::Stop(_))) {
                        prop_assert!(arc.dist_km <= range + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn refining_a_grid_never_merges_candidates(seed in any::<u64>(), base in 1u32..8, factor in 2u32..6) {
        let paths = corridor_paths(seed, &CorridorSpec::default());
        prop_assume!(!paths.is_empty());
        let bbox = GridSpec::covering(&paths, 1, 1).unwrap().bbox;
        let count = |k: u32| snap_to_grid(&paths, &GridSpec::new(k, k, bbox).unwrap()).unwrap().candidates.len();
        prop_assert!(count(base * factor) >= count(base));
    }
}
