//! Anatomy of the local time-stepping cycle: which levels evolve at each
//! iteration, the per-level time steps, and the per-leaf logical clocks
//! meeting at the synchronization point.

use mrlt::lt::{level_timestep, lt_cycle, min_active_level, LtClock};
use mrlt::runner;
use mrlt::tree::NodeKind;
use mrlt::SchemeKind;

fn main() {
    let (model, d) = mrlt::builtin_problems("advection1d").unwrap();
    let max_level = 6u8;
    let mut cfg = runner::RunConfig::new("advection1d", SchemeKind::MrltNerk2);
    cfg.max_level = Some(max_level);
    cfg.epsilon = Some(5e-3);
    let resolved = runner::resolve(&cfg).unwrap();
    let mut tree = runner::build_initial_adapted(&resolved).unwrap();

    let lc = tree.coarsest_leaf_level();
    let dt = d.sigma / (1u64 << max_level) as f64;
    println!("adaptive grid: leaf levels {lc}..{}", tree.finest_leaf_level());
    for l in lc..=max_level {
        println!(
            "  level {l}: dt_l = 2^(L-l) dt = {:.3e}",
            level_timestep(l, max_level, dt)
        );
    }
    let cycle = 1u64 << (max_level - lc);
    println!("one coarse cycle = {cycle} iterations\n");

    let mut clock = LtClock { dt, n: 0 };
    for n in 0..cycle {
        let l_min = min_active_level(n, max_level);
        let active: Vec<u8> = (l_min.max(lc)..=max_level)
            .filter(|l| !tree.level_lists(*l).leaves.is_empty())
            .collect();
        println!("iteration {n:>2}: l_min = {l_min}, evolving leaf levels {active:?}");
        lt_cycle(&mut tree, &mut clock, &model, SchemeKind::MrltNerk2, None).unwrap();
    }
    let clocks: std::collections::BTreeSet<u64> = tree
        .nodes
        .values()
        .filter(|r| r.kind == NodeKind::Leaf)
        .map(|r| r.clock)
        .collect();
    println!("\nafter the cycle every leaf clock reads {clocks:?} (units of dt)");
}
