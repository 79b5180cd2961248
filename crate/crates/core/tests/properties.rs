use std::collections::BTreeMap;
use std::sync::Arc;

use amapf_core::decentral::{compute_subgroups, merge_tp, TpTable};
use amapf_core::metrics::{potential, potential_weight};
use amapf_core::sim::default_t_max;
use amapf_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(map_seed: u64, width: u32, height: u32, density: f64, n: usize, scen_seed: u64) -> Option<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(map_seed);
    let map = Arc::new(maps::random_obstacles(width, height, density, &mut rng).ok()?);
    let scn = generate_scenario(&map, "prop", n, scen_seed).ok()?;
    take_instance(&scn, map, n).ok()
}

fn arb_instance() -> impl Strategy<Value = Instance> {
    (any::<u64>(), 4u32..12, 4u32..12, 0.0f64..0.25, 1usize..16, any::<u64>())
        .prop_filter_map("map too small", |(ms, w, h, d, n, ss)| instance(ms, w, h, d, n, ss))
}

fn arb_kind() -> impl Strategy<Value = SolverKind> {
    prop::sample::select(SolverKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_solver_moves_without_conflicts(inst in arb_instance(), kind in arb_kind(), k in 2u32..5) {
        let r = run(&inst, SolverConfig::new(kind, k, default_t_max(&inst.map))).unwrap();
        prop_assert!(validate_trajectory(&r.trajectory.paths, &inst.map).is_empty());
        prop_assert_eq!(r.trajectory.horizon(), r.steps_used as usize + 1);
        if r.solved {
            let mut finals: Vec<Cell> = r.trajectory.paths.iter().map(|p| *p.last().unwrap()).collect();
            finals.sort();
            let mut targets = inst.targets.clone();
            targets.sort();
            prop_assert_eq!(finals, targets);
        }
    }

    #[test]
    fn tp_swap_terminates(inst in arb_instance(), k in 2u32..6) {
        let r = run(&inst, SolverConfig::new(SolverKind::TpSwap, k, default_t_max(&inst.map))).unwrap();
        prop_assert!(r.solved);
    }

    #[test]
    fn priorities_stay_a_permutation(inst in arb_instance(), kind in arb_kind()) {
        let fields = DistanceFields::build(&inst.map, &inst.targets).unwrap();
        let sim = Simulation::new(&inst, &fields, SolverConfig::new(kind, 2, 50)).unwrap();
        let mut w = sim.init_world().unwrap();
        for _ in 0..20 {
            sim.step(&mut w).unwrap();
            let mut pr: Vec<u32> = w.agents.iter().map(|a| a.priority).collect();
            pr.sort();
            prop_assert_eq!(pr, (0..inst.agents() as u32).collect::<Vec<_>>());
            if matches!(kind, SolverKind::CTswap | SolverKind::DTswapC) {
                let mut t: Vec<usize> = w.agents.iter().map(|a| a.target).collect();
                t.sort();
                prop_assert_eq!(t, (0..inst.agents()).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn potential_strictly_decreases_until_done(inst in arb_instance()) {
        let fields = DistanceFields::build(&inst.map, &inst.targets).unwrap();
        let sim = Simulation::new(&inst, &fields, SolverConfig::new(SolverKind::TpSwap, 2, default_t_max(&inst.map))).unwrap();
        let c = potential_weight(inst.map.diameter());
        let mut w = sim.init_world().unwrap();
        let mut prev = potential(0, &w.agents, &sim.ctx(), c).unwrap();
        while !w.is_solved(&inst.targets) {
            sim.step(&mut w).unwrap();
            let now = potential(w.t, &w.agents, &sim.ctx(), c).unwrap();
            prop_assert!(now.phi < prev.phi, "{:?} -> {:?}", prev, now);
            prop_assert!(now.phi3 <= prev.phi3);
            prev = now;
        }
    }

    #[test]
    fn full_range_decentralized_matches_centralized(inst in arb_instance(), seed in any::<u64>()) {
        let t_max = default_t_max(&inst.map);
        let mut c = SolverConfig::new(SolverKind::CTswap, 0, t_max);
        c.assignment = Some(AssignmentRule::RandomConsistent);
        c.seed = seed;
        let mut d = SolverConfig::new(SolverKind::DTswapC, inst.map.diameter().max(2), t_max);
        d.seed = seed;
        prop_assert_eq!(run(&inst, c).unwrap().trajectory, run(&inst, d).unwrap().trajectory);
    }

    #[test]
    fn groups_are_separated_by_more_than_k(inst in arb_instance(), k in 2u32..5) {
        let p = compute_subgroups(&inst.starts, k).unwrap();
        let mut group_of = BTreeMap::new();
        for (g, members) in p.groups.iter().enumerate() {
            for &m in members {
                prop_assert!(group_of.insert(m, g).is_none());
            }
        }
        prop_assert_eq!(group_of.len(), inst.agents());
        for i in 0..inst.agents() {
            for j in 0..inst.agents() {
                if inst.starts[i].chebyshev(inst.starts[j]) <= k {
                    prop_assert_eq!(group_of[&i], group_of[&j]);
                }
            }
        }
    }

    #[test]
    fn merge_is_order_independent(entries in prop::collection::vec(prop::collection::vec(prop::option::of(0u32..20), 6), 1..6)) {
        let tables: Vec<TpTable> = entries
            .iter()
            .map(|e| {
                let mut t = TpTable::new(6);
                for (i, v) in e.iter().enumerate() {
                    if let Some(p) = v {
                        t.raise(i, *p);
                    }
                }
                t
            })
            .collect();
        let fwd = merge_tp(tables.iter()).unwrap();
        let rev = merge_tp(tables.iter().rev()).unwrap();
        prop_assert_eq!(&fwd, &rev);
        for t in &tables {
            for i in 0..6 {
                prop_assert!(fwd.get(i) >= t.get(i));
            }
        }
    }

    #[test]
    fn map_text_roundtrip(seed in any::<u64>(), w in 1u32..20, h in 1u32..20, d in 0.0f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = maps::random_obstacles(w, h, d, &mut rng).unwrap();
        prop_assert_eq!(parse_map(&m.to_map_text()).unwrap(), m);
    }

    #[test]
    fn scenario_formats_roundtrip(inst in arb_instance(), seed in any::<u64>()) {
        let scn = generate_scenario(&inst.map, "prop", inst.agents(), seed).unwrap();
        prop_assert_eq!(&Scenario::from_json(&scn.to_json(), &inst.map).unwrap(), &scn);
        prop_assert_eq!(parse_scen(&scn.to_scen(&inst.map).unwrap(), &inst.map).unwrap().pairs, scn.pairs);
    }

    #[test]
    fn dump_roundtrip(inst in arb_instance(), kind in arb_kind()) {
        let mut cfg = SolverConfig::new(kind, 2, 60);
        cfg.record_phi = kind == SolverKind::TpSwap;
        let r = run(&inst, cfg).unwrap();
        let dump = TrajectoryDump::from_result(&r, BTreeMap::from([("solver".to_string(), kind.to_string())]));
        prop_assert_eq!(TrajectoryDump::parse(&dump.to_text()).unwrap(), dump);
    }
}
