use smallvec::{smallvec, SmallVec};

/// Vector of conserved cell averages. Inline up to four components,
/// which covers every model in this crate (2-D Euler is the largest).
pub type State = SmallVec<[f64; 4]>;

pub fn zeros(ncomp: usize) -> State {
    smallvec![0.0; ncomp]
}

pub fn constant(ncomp: usize, v: f64) -> State {
    smallvec![v; ncomp]
}

/// c0*a + c1*b, componentwise.
pub fn lin2(c0: f64, a: &State, c1: f64, b: &State) -> State {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| c0 * x + c1 * y).collect()
}

/// c0*a + c1*b + c2*c, componentwise.
pub fn lin3(c0: f64, a: &State, c1: f64, b: &State, c2: f64, c: &State) -> State {
    debug_assert_eq!(a.len(), b.len());
    debug_assert_eq!(a.len(), c.len());
    a.iter()
        .zip(b.iter())
        .zip(c.iter())
        .map(|((x, y), z)| c0 * x + c1 * y + c2 * z)
        .collect()
}

/// a += c*b.
pub fn axpy(a: &mut State, c: f64, b: &State) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b.iter()) {
        *x += c * y;
    }
}

pub fn sub(a: &State, b: &State) -> State {
    lin2(1.0, a, -1.0, b)
}

pub fn scale(a: &State, c: f64) -> State {
    a.iter().map(|x| c * x).collect()
}

pub fn max_abs(a: &State) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Selects one of the per-cell stage buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Solution at the start of the cell's current step.
    QN,
    /// First-stage value q*.
    QStar,
    /// Second-stage value q** (RK3), also the cell's mid-step value.
    QDstar,
    /// NERK dense output at theta = 1/4.
    NerkQuarter,
    /// NERK dense output at theta = 1/2 (RK2 family mid-step value).
    NerkHalf,
    /// NERK dense output at theta = 3/4.
    NerkThreeQuarter,
}
