#![allow(dead_code)]

use spatialnav::{GridWorld, PoiId, RoadGraph, Trajectory, WorldConfig};

/// `n_poi` is capped at the lattice size.
pub fn world(grid_size: u32, n_poi: usize, seed: u64) -> GridWorld {
    let n_poi = n_poi.min(((grid_size + 1) * (grid_size + 1)) as usize);
    GridWorld::build(WorldConfig { grid_size, n_poi, seed, ..Default::default() }).unwrap()
}

pub fn all_trajectories(world: &GridWorld) -> Vec<Trajectory> {
    let graph = RoadGraph::build(world);
    let ids = world.poi_ids();
    let mut out = Vec::new();
    for &a in &ids {
        let targets: Vec<PoiId> = ids.iter().copied().filter(|&b| b != a).collect();
        out.extend(graph.shortest_paths_from(world, a, &targets).unwrap());
    }
    out
}
