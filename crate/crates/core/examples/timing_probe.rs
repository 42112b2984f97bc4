use mrlt::lt::{self, LtClock};
use mrlt::mr::ThresholdPolicy;
use mrlt::runner::{self, RunConfig};
use mrlt::time::cfl_timestep;
use mrlt::tree::NodeKind;
use mrlt::SchemeKind;

fn check(tree: &mrlt::GradedTree, n: u64, max: u8, stage: &str) -> bool {
    let mut ok = true;
    for (idx, rec) in &tree.nodes {
        if rec.kind != NodeKind::Leaf {
            continue;
        }
        let p = 1u64 << (max - idx.level);
        let expected = if n % p == 0 { n } else { (n / p) * p + p };
        if rec.clock != expected {
            println!(
                "  n={n} {stage}: leaf level {} {:?} clock {} expected {expected}",
                idx.level, idx.coords, rec.clock
            );
            ok = false;
        }
    }
    ok
}

fn main() {
    let mut cfg = RunConfig::new("burgers2d", SchemeKind::MrltNerk2);
    cfg.max_level = Some(7);
    let resolved = runner::resolve(&cfg).unwrap();
    let mut tree = runner::build_initial_adapted(&resolved).unwrap();
    let model = resolved.model.clone();
    let policy = ThresholdPolicy::new(resolved.epsilon, model.ncomp);
    let max = tree.max_level;
    let mut t = 0.0f64;
    let mut cycle = 0;
    'outer: while t < resolved.t_end && cycle < 40 {
        let mut smax = 0.0f64;
        for idx in tree.all_leaves() {
            smax = smax.max(model.wave_speed(&tree.record(idx).q_n));
        }
        let dx = tree.width(max, 0);
        let dt = cfl_timestep(smax, 0.0, dx, 2, resolved.sigma, None).unwrap();
        let lc = tree.coarsest_leaf_level();
        let clen = 1u64 << (max - lc);
        for r in tree.nodes.values_mut() {
            r.clock = 0;
        }
        let mut clock = LtClock { dt, n: 0 };
        println!("cycle {cycle}: lc={lc} clen={clen} dt={dt:.3e} leaves={}", tree.leaf_statistics().0);
        for _ in 0..clen {
            let n = clock.n;
            tree.rebuild_lists();
            if !check(&tree, n, max, "pre") {
                break 'outer;
            }
            if let Err(e) =
                lt::lt_cycle(&mut tree, &mut clock, &model, SchemeKind::MrltNerk2, Some(&policy))
            {
                println!("cycle error: {e}");
                break 'outer;
            }
            if !check(&tree, n + 1, max, "post") {
                break 'outer;
            }
        }
        t += clen as f64 * dt;
        cycle += 1;
    }
    println!("reached t={t:.4} after {cycle} coarse cycles");
}
