//! Exact one-step amplification polynomials of the schemes on the two-level
//! interface model dq/dt = lambda q, together with the four interface error
//! terms, all in exact rational arithmetic.

use mrlt::diagnostics::{amplification_polynomial, interface_error_terms, InterfaceSide};
use mrlt::SchemeKind;

fn show(label: &str, poly: &mrlt::diagnostics::Poly) {
    let c = poly.coeffs_f64();
    let terms: Vec<String> = c
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, v)| match k {
            0 => format!("{v}"),
            1 => format!("{v} z"),
            _ => format!("{v} z^{k}"),
        })
        .collect();
    println!("{label:<34} {}", if terms.is_empty() { "0".into() } else { terms.join(" + ") });
}

fn main() {
    println!("one-step amplification factors g(z), z = lambda dt of the cell\n");
    for scheme in [SchemeKind::FvRk2, SchemeKind::FvRk3] {
        show(
            &format!("{} uniform", scheme.name()),
            &amplification_polynomial(scheme, InterfaceSide::Uniform),
        );
    }
    for scheme in [SchemeKind::MrltRk2, SchemeKind::MrltNerk2, SchemeKind::MrltNerk3] {
        show(
            &format!("{} fine side", scheme.name()),
            &amplification_polynomial(scheme, InterfaceSide::FineSide),
        );
        show(
            &format!("{} coarse side", scheme.name()),
            &amplification_polynomial(scheme, InterfaceSide::CoarseSide),
        );
    }
    println!("\ninterface error terms of the three-stage scheme:\n");
    let [e1, e2, e3, e4] = interface_error_terms();
    show("eps1 (prediction, fine leaf)", &e1);
    show("eps2 (projection, coarse leaf)", &e2);
    show("eps3 (NERK prediction)", &e3);
    show("eps4 (projection of fine step)", &e4);
}
