//! Self-convergence orders on the frozen two-block advection grid
//! (1/512 cells on [0, 0.5], 1/256 on [0.5, 1], periodic, centered flux).
//! Each scheme runs at dt, dt/2 and dt/4 for both listed dt values.
//!
//! The full study takes a few minutes; pass --quick for a single larger dt.

use mrlt::runner::convergence_harness;
use mrlt::SchemeKind;

fn main() {
    let quick = std::env::args().any(|a| a == "--quick");
    let dt_list: Vec<f64> = if quick { vec![3.2e-4] } else { vec![1.6e-4, 0.8e-4] };
    let schemes = [
        SchemeKind::FvRk2,
        SchemeKind::MrRk2,
        SchemeKind::MrltRk2,
        SchemeKind::MrltNerk2,
        SchemeKind::FvRk3,
        SchemeKind::MrRk3,
        SchemeKind::MrltNerk3,
    ];
    print!("{:<14}", "scheme");
    for dt in &dt_list {
        print!(" {:>12}", format!("dt={dt:.1e}"));
    }
    println!();
    for scheme in schemes {
        let rows = convergence_harness(&[scheme], &dt_list).expect("harness run");
        print!("{:<14}", scheme.name());
        for p in &rows[0].orders {
            print!(" {p:>12.4}");
        }
        println!();
    }
}
