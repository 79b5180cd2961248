//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use amapf_core::maps::MapCatalog;
use amapf_core::{generate_scenario, take_instance, Instance};

/// Instance with `n` agents on a named benchmark map (or its stand-in).
pub fn instance(map: &str, n: usize, seed: u64) -> Instance {
    let (grid, _) = MapCatalog::from_env().load(map).expect("benchmark map");
    let scn = generate_scenario(&grid, map, n, seed).expect("scenario");
    take_instance(&scn, Arc::clone(&grid), n).expect("instance")
}
