use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::state::{self, Slot, State};
use crate::tree::{CellIndex, GradedTree, NodeKind, MAX_DIM};

/// Ghost-cell rule for one face of the domain.
#[derive(Debug, Clone)]
pub enum GhostBc {
    Periodic,
    /// Homogeneous Neumann: mirror copy of the interior.
    Mirror,
    /// Dirichlet: linear extrapolation through the boundary value,
    /// ghost = 2 g - interior.
    DirichletExtrap(Vec<f64>),
}

/// Ghost rules for all faces, indexed [axis][side] with side 0 = low, 1 = high.
#[derive(Debug, Clone)]
pub struct GhostSpec {
    pub faces: [[GhostBc; 2]; MAX_DIM],
}

impl GhostSpec {
    pub fn all_periodic() -> Self {
        GhostSpec {
            faces: std::array::from_fn(|_| [GhostBc::Periodic, GhostBc::Periodic]),
        }
    }

    pub fn all_mirror() -> Self {
        GhostSpec {
            faces: std::array::from_fn(|_| [GhostBc::Mirror, GhostBc::Mirror]),
        }
    }

    pub fn periodic_flags(&self) -> [bool; MAX_DIM] {
        std::array::from_fn(|axis| matches!(self.faces[axis][0], GhostBc::Periodic))
    }

    /// Ghost value just outside face (axis, side) given the interior value.
    pub fn ghost_value(&self, axis: usize, side: i32, interior: &State) -> State {
        let bc = &self.faces[axis][if side > 0 { 1 } else { 0 }];
        match bc {
            GhostBc::Periodic => interior.clone(),
            GhostBc::Mirror => interior.clone(),
            GhostBc::DirichletExtrap(g) => g
                .iter()
                .zip(interior.iter())
                .map(|(gv, iv)| 2.0 * gv - iv)
                .collect(),
        }
    }
}

/// Mean of the 2^d children, componentwise.
pub fn project(children: &[State]) -> State {
    let n = children.len();
    debug_assert!(n.is_power_of_two());
    let mut acc = state::zeros(children[0].len());
    for c in children {
        state::axpy(&mut acc, 1.0, c);
    }
    state::scale(&acc, 1.0 / n as f64)
}

/// Third-order prediction of the 2^d children from the 3^d parent stencil.
/// The stencil is indexed by offsets o in {0,1,2}^d, linearized as
/// sum(o_axis * 3^axis). 1-D rule: q_i -+ (1/8)(q_{i+1} - q_{i-1});
/// higher dimensions by tensor-product composition.
pub fn predict(stencil: &[State], dim: usize) -> Vec<State> {
    debug_assert_eq!(stencil.len(), 3usize.pow(dim as u32));
    let nchild = 1usize << dim;
    let mut out = Vec::with_capacity(nchild);
    for slot in 0..nchild {
        out.push(predict_child(stencil, dim, slot));
    }
    out
}

/// Prediction of a single child (bit per axis: 0 = low half, 1 = high half).
pub fn predict_child(stencil: &[State], dim: usize, child_slot: usize) -> State {
    // Fold one axis at a time: combine triples along the axis into one value.
    let mut vals: Vec<State> = stencil.to_vec();
    let mut ndim = dim;
    while ndim > 0 {
        // The current array has 3^ndim entries; fold the lowest axis.
        let axis = dim - ndim;
        let s = if (child_slot >> axis) & 1 == 1 { 1.0 } else { -1.0 };
        let rest = 3usize.pow((ndim - 1) as u32);
        let mut next = Vec::with_capacity(rest);
        for r in 0..rest {
            let lo = &vals[3 * r];
            let mid = &vals[3 * r + 1];
            let hi = &vals[3 * r + 2];
            let mut v = mid.clone();
            state::axpy(&mut v, s / 8.0, &state::sub(hi, lo));
            next.push(v);
        }
        vals = next;
        ndim -= 1;
    }
    vals.pop().unwrap()
}

/// Wavelet coefficient: actual minus predicted child average.
pub fn detail(actual: &State, predicted: &State) -> State {
    state::sub(actual, predicted)
}

/// Threshold policy for cell significance. A cell is significant when
/// max over components of |detail_c| / scale_c exceeds epsilon.
#[derive(Debug, Clone)]
pub struct ThresholdPolicy {
    pub epsilon: f64,
    pub scale: Vec<f64>,
}

impl ThresholdPolicy {
    pub fn new(epsilon: f64, ncomp: usize) -> Self {
        assert!(epsilon >= 0.0);
        ThresholdPolicy { epsilon, scale: vec![1.0; ncomp] }
    }

    pub fn significant(&self, detail: &State) -> bool {
        detail
            .iter()
            .zip(self.scale.iter())
            .any(|(d, s)| (d / s).abs() > self.epsilon)
    }
}

// ---------------------------------------------------------------------------
// Stencil gathering on the tree
// ---------------------------------------------------------------------------

/// Value of the cell at `idx`, falling back to the covering coarser cell when
/// the exact cell is absent (possible at corner offsets under face-only
/// gradedness).
pub fn cell_value_or_covering(tree: &GradedTree, idx: CellIndex, slot: Slot) -> Result<State> {
    let mut cur = idx;
    loop {
        if let Some(rec) = tree.nodes.get(&cur) {
            return Ok(rec.slot(slot).clone());
        }
        match cur.parent() {
            Some(p) => cur = p,
            None => {
                return Err(Error::MissingStencil(idx.fmt_short(tree.dim)));
            }
        }
    }
}

/// Gather the 3^d stencil around `center` reading `slot`, applying the ghost
/// rule outside the domain.
pub fn stencil_values(
    tree: &GradedTree,
    center: CellIndex,
    slot: Slot,
    ghost: &GhostSpec,
) -> Result<Vec<State>> {
    let dim = tree.dim;
    let n = 1i64 << center.level;
    let count = 3usize.pow(dim as u32);
    let mut out = Vec::with_capacity(count);
    for lin in 0..count {
        let mut rem = lin;
        let mut coords = center.coords;
        // Dirichlet transforms to apply after fetching the interior value.
        let mut dirichlet: Vec<&Vec<f64>> = Vec::new();
        for axis in 0..dim {
            let off = (rem % 3) as i64 - 1;
            rem /= 3;
            let mut c = center.coords[axis] as i64 + off;
            if c < 0 || c >= n {
                match &ghost.faces[axis][if c < 0 { 0 } else { 1 }] {
                    GhostBc::Periodic => c = c.rem_euclid(n),
                    GhostBc::Mirror => c = if c < 0 { -c - 1 } else { 2 * n - 1 - c },
                    GhostBc::DirichletExtrap(g) => {
                        c = if c < 0 { -c - 1 } else { 2 * n - 1 - c };
                        dirichlet.push(g);
                    }
                }
            }
            coords[axis] = c as u32;
        }
        let mut v = cell_value_or_covering(tree, CellIndex::new(center.level, coords), slot)?;
        for g in dirichlet {
            v = g.iter().zip(v.iter()).map(|(gv, iv)| 2.0 * gv - iv).collect();
        }
        out.push(v);
    }
    Ok(out)
}

/// Predict `slot` for every virtual leaf at `level` from its parent's stencil.
pub fn update_virtual_leaves(
    tree: &mut GradedTree,
    level: u8,
    slot: Slot,
    ghost: &GhostSpec,
) -> Result<()> {
    update_virtual_leaves_from(tree, level, slot, slot, ghost)
}

/// Same as `update_virtual_leaves` but reading the parent-level data from
/// `src_slot` while writing the virtual leaves' `dst_slot`.
pub fn update_virtual_leaves_from(
    tree: &mut GradedTree,
    level: u8,
    src_slot: Slot,
    dst_slot: Slot,
    ghost: &GhostSpec,
) -> Result<()> {
    let virtuals: Vec<CellIndex> = tree.level_lists(level).virtuals.clone();
    if virtuals.is_empty() {
        return Ok(());
    }
    // Group by parent so each stencil is gathered once.
    let mut by_parent: HashMap<CellIndex, Vec<CellIndex>> = HashMap::new();
    for v in virtuals {
        by_parent.entry(v.parent().expect("virtual has parent")).or_default().push(v);
    }
    let mut parents: Vec<CellIndex> = by_parent.keys().copied().collect();
    parents.sort_unstable();
    for p in parents {
        let stencil = stencil_values(tree, p, src_slot, ghost)?;
        for v in &by_parent[&p] {
            let val = predict_child(&stencil, tree.dim, v.child_slot(tree.dim));
            *tree.record_mut(*v).slot_mut(dst_slot) = val;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Graded-tree normalization
// ---------------------------------------------------------------------------

/// Restore gradedness and virtual-leaf completeness. Leaves that face a finer
/// neighbor receive 2^d virtual children with predicted q_n; leaves adjacent
/// to cells two or more levels finer are split (children predicted from the
/// parent stencil). Existing leaf data is not modified. Idempotent.
pub fn ensure_graded_with_virtuals(tree: &mut GradedTree, ghost: &GhostSpec) -> Result<()> {
    // Split pass until no leaf faces a neighbor more than one level finer.
    loop {
        tree.rebuild_lists();
        let mut to_split: Vec<CellIndex> = Vec::new();
        for level in 0..=tree.max_level {
            for leaf in &tree.level_lists(level).leaves {
                'faces: for axis in 0..tree.dim {
                    for side in [-1, 1] {
                        if let Some(nb) = tree.same_level_neighbor(*leaf, axis, side) {
                            if tree.kind(nb) == Some(NodeKind::Internal) {
                                for fc in tree.face_children(nb, axis, -side)? {
                                    if tree.kind(fc) == Some(NodeKind::Internal) {
                                        to_split.push(*leaf);
                                        break 'faces;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        if to_split.is_empty() {
            break;
        }
        to_split.sort_unstable();
        to_split.dedup();
        for leaf in to_split {
            split_leaf_predicted(tree, leaf, ghost)?;
        }
    }

    // Incremental virtual sync: add where needed, drop orphans.
    tree.rebuild_lists();
    let mut leaves: Vec<CellIndex> = tree.all_leaves();
    leaves.sort_unstable_by_key(|i| (i.level, *i));
    for leaf in leaves {
        let needs = tree.needs_virtual_children(leaf);
        let children = if leaf.level < tree.max_level {
            tree.children(leaf)?
        } else {
            Vec::new()
        };
        let have = children
            .first()
            .map(|c| tree.kind(*c) == Some(NodeKind::VirtualLeaf))
            .unwrap_or(false);
        if needs && !have {
            let stencil = stencil_values(tree, leaf, Slot::QN, ghost)?;
            let clock = tree.record(leaf).clock;
            for ch in &children {
                let mut rec = crate::tree::CellRecord::new(NodeKind::VirtualLeaf, tree.ncomp);
                rec.q_n = predict_child(&stencil, tree.dim, ch.child_slot(tree.dim));
                rec.clock = clock;
                tree.nodes.insert(*ch, rec);
            }
            tree.mark_dirty();
        } else if !needs && have {
            for ch in &children {
                tree.nodes.remove(ch);
            }
            tree.mark_dirty();
        }
    }
    tree.rebuild_lists();
    Ok(())
}

/// Split a leaf into real children; existing virtual children are promoted
/// (their predicted values kept), missing children predicted from the parent
/// stencil.
pub fn split_leaf_predicted(
    tree: &mut GradedTree,
    leaf: CellIndex,
    ghost: &GhostSpec,
) -> Result<Vec<CellIndex>> {
    let stencil = stencil_values(tree, leaf, Slot::QN, ghost)?;
    let existing_virtual = tree
        .children(leaf)?
        .iter()
        .map(|c| tree.kind(*c) == Some(NodeKind::VirtualLeaf))
        .collect::<Vec<_>>();
    let children = tree.split_into_leaves(leaf);
    for (k, ch) in children.iter().enumerate() {
        if !existing_virtual[k] {
            let v = predict_child(&stencil, tree.dim, ch.child_slot(tree.dim));
            tree.record_mut(*ch).q_n = v;
        }
    }
    Ok(children)
}

// ---------------------------------------------------------------------------
// Grid adaptation
// ---------------------------------------------------------------------------

/// One remeshing pass: compute details bottom-up, delete insignificant leaf
/// groups, refine leaves with significant details, then restore gradedness
/// and virtual leaves. `min_active` restricts every topology change to levels
/// where both sides of the merge/split are at the same time instant
/// (0 means unrestricted).
pub fn adapt_grid(
    tree: &mut GradedTree,
    policy: &ThresholdPolicy,
    ghost: &GhostSpec,
    min_active: u8,
) -> Result<()> {
    if policy.epsilon.is_infinite() {
        return Ok(()); // frozen grid
    }
    tree.rebuild_lists();
    project_upward(tree, Slot::QN, min_active);

    // Details for every real sibling group whose parent level is active.
    let mut sig: HashMap<CellIndex, bool> = HashMap::new();
    for p_level in (min_active..tree.max_level).rev() {
        let parents: Vec<CellIndex> = tree.level_lists(p_level).internals.clone();
        for p in parents {
            let children = tree.children(p)?;
            if tree.kind(children[0]) == Some(NodeKind::VirtualLeaf) {
                continue;
            }
            let stencil = stencil_values(tree, p, Slot::QN, ghost)?;
            let preds = predict(&stencil, tree.dim);
            for (k, ch) in children.iter().enumerate() {
                let d = detail(tree.record(*ch).slot(Slot::QN), &preds[k]);
                let s = policy.significant(&d);
                tree.record_mut(*ch).detail = d;
                sig.insert(*ch, s);
            }
        }
    }

    // Coarsening: remove insignificant all-leaf sibling groups, deepest first.
    for child_level in ((min_active + 1)..=tree.max_level).rev() {
        tree.rebuild_lists();
        let parents: Vec<CellIndex> = tree.level_lists(child_level - 1).internals.clone();
        for p in parents {
            let children = tree.children(p)?;
            let mergeable = children.iter().all(|ch| {
                tree.kind(*ch) == Some(NodeKind::Leaf)
                    && !sig.get(ch).copied().unwrap_or(true)
                    && (0..tree.dim).all(|axis| {
                        [-1, 1]
                            .iter()
                            .all(|side| !tree.has_finer_face_neighbor(*ch, axis, *side))
                    })
            });
            if mergeable {
                tree.merge_children(p);
            }
        }
    }

    // Refinement: split leaves whose own detail is significant.
    tree.rebuild_lists();
    let grow_floor = if min_active == 0 { 1 } else { min_active + 1 };
    let mut grow: Vec<CellIndex> = Vec::new();
    for level in grow_floor..tree.max_level {
        for leaf in &tree.level_lists(level).leaves {
            if sig.get(leaf).copied().unwrap_or(false) {
                grow.push(*leaf);
            }
        }
    }
    grow.sort_unstable();
    for leaf in grow {
        if tree.kind(leaf) != Some(NodeKind::Leaf) {
            continue; // already split by a gradedness cascade
        }
        try_grow(tree, leaf, ghost, min_active)?;
    }

    ensure_graded_with_virtuals(tree, ghost)?;
    Ok(())
}

/// Split `leaf`, first splitting any coarser face-neighbors so the result
/// stays graded. Every split in the cascade must sit on an active level,
/// otherwise nothing is changed.
fn try_grow(
    tree: &mut GradedTree,
    leaf: CellIndex,
    ghost: &GhostSpec,
    min_active: u8,
) -> Result<bool> {
    let mut plan: Vec<CellIndex> = Vec::new();
    if !plan_grow(tree, leaf, min_active, &mut plan) {
        return Ok(false);
    }
    // Coarsest splits first so stencils stay resolvable.
    plan.sort_unstable_by_key(|i| (i.level, *i));
    plan.dedup();
    for idx in plan {
        if tree.kind(idx) == Some(NodeKind::Leaf) {
            split_leaf_predicted(tree, idx, ghost)?;
        }
    }
    Ok(true)
}

fn plan_grow(tree: &GradedTree, leaf: CellIndex, min_active: u8, plan: &mut Vec<CellIndex>) -> bool {
    if leaf.level >= tree.max_level || leaf.level < min_active {
        return false;
    }
    if plan.contains(&leaf) {
        return true;
    }
    plan.push(leaf);
    for axis in 0..tree.dim {
        for side in [-1, 1] {
            if let Some(nb) = tree.same_level_neighbor(leaf, axis, side) {
                // A virtual neighbor is a phantom: the real coverage is its
                // parent leaf, which must split for gradedness to survive.
                match tree.kind(nb) {
                    Some(NodeKind::Leaf) | Some(NodeKind::Internal) => continue,
                    Some(NodeKind::VirtualLeaf) | None => {}
                }
                let mut cov = nb;
                let covering_leaf = loop {
                    match cov.parent() {
                        Some(p) => {
                            cov = p;
                            match tree.kind(cov) {
                                Some(NodeKind::Leaf) => break Some(cov),
                                Some(NodeKind::Internal) => break None,
                                Some(NodeKind::VirtualLeaf) | None => continue,
                            }
                        }
                        None => return false,
                    }
                };
                if let Some(cov) = covering_leaf {
                    if !plan_grow(tree, cov, min_active, plan) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Project `slot` from the leaves up into every internal node at levels
/// >= `floor`.
pub fn project_upward(tree: &mut GradedTree, slot: Slot, floor: u8) {
    for level in (floor..tree.max_level).rev() {
        let parents: Vec<CellIndex> = tree.level_lists(level).internals.clone();
        for p in parents {
            let children = tree.children(p).expect("internal has children");
            if tree.kind(children[0]) == Some(NodeKind::VirtualLeaf) {
                continue;
            }
            let vals: Vec<State> = children.iter().map(|c| tree.record(*c).slot(slot).clone()).collect();
            *tree.record_mut(p).slot_mut(slot) = project(&vals);
        }
    }
}

// ---------------------------------------------------------------------------
// Dense transform on uniform data
// ---------------------------------------------------------------------------

/// Uniform field of cell averages at one refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseField {
    pub dim: usize,
    pub level: u8,
    pub ncomp: usize,
    pub data: Vec<f64>, // cell-major, component-minor
}

impl DenseField {
    pub fn zeros(dim: usize, level: u8, ncomp: usize) -> Self {
        let n = 1usize << (level as usize * dim);
        DenseField { dim, level, ncomp, data: vec![0.0; n * ncomp] }
    }

    pub fn cells(&self) -> usize {
        1usize << (self.level as usize * self.dim)
    }

    pub fn side(&self) -> usize {
        1usize << self.level
    }

    fn lin(&self, c: [i64; MAX_DIM]) -> usize {
        let n = self.side() as i64;
        let mut idx = 0i64;
        for axis in (0..self.dim).rev() {
            idx = idx * n + c[axis];
        }
        idx as usize
    }

    pub fn get(&self, c: [i64; MAX_DIM]) -> State {
        let l = self.lin(c) * self.ncomp;
        self.data[l..l + self.ncomp].iter().copied().collect()
    }

    pub fn set(&mut self, c: [i64; MAX_DIM], v: &State) {
        let l = self.lin(c) * self.ncomp;
        self.data[l..l + self.ncomp].copy_from_slice(v);
    }

    /// Value with ghost handling at the domain edges.
    pub fn get_ghost(&self, mut c: [i64; MAX_DIM], ghost: &GhostSpec) -> State {
        let n = self.side() as i64;
        let mut dirichlet: Vec<&Vec<f64>> = Vec::new();
        for axis in 0..self.dim {
            if c[axis] < 0 || c[axis] >= n {
                match &ghost.faces[axis][if c[axis] < 0 { 0 } else { 1 }] {
                    GhostBc::Periodic => c[axis] = c[axis].rem_euclid(n),
                    GhostBc::Mirror => {
                        c[axis] = if c[axis] < 0 { -c[axis] - 1 } else { 2 * n - 1 - c[axis] }
                    }
                    GhostBc::DirichletExtrap(g) => {
                        c[axis] = if c[axis] < 0 { -c[axis] - 1 } else { 2 * n - 1 - c[axis] };
                        dirichlet.push(g);
                    }
                }
            }
        }
        let mut v = self.get(c);
        for g in dirichlet {
            v = g.iter().zip(v.iter()).map(|(gv, iv)| 2.0 * gv - iv).collect();
        }
        v
    }

    pub fn max_abs_diff(&self, other: &DenseField) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// One projection step: averages at level-1 from level data.
pub fn dense_project(fine: &DenseField) -> DenseField {
    assert!(fine.level > 0);
    let mut coarse = DenseField::zeros(fine.dim, fine.level - 1, fine.ncomp);
    let n = coarse.side() as i64;
    let nchild = 1usize << fine.dim;
    let mut idx = [0i64; MAX_DIM];
    for_each_cell(fine.dim, n, &mut idx, &mut |c| {
        let mut acc = state::zeros(fine.ncomp);
        for s in 0..nchild {
            let mut fc = [0i64; MAX_DIM];
            for axis in 0..fine.dim {
                fc[axis] = 2 * c[axis] + ((s >> axis) & 1) as i64;
            }
            state::axpy(&mut acc, 1.0, &fine.get(fc));
        }
        coarse.set(c, &state::scale(&acc, 1.0 / nchild as f64));
    });
    coarse
}

/// One prediction step: level+1 estimates from level data.
pub fn dense_predict(coarse: &DenseField, ghost: &GhostSpec) -> DenseField {
    let mut fine = DenseField::zeros(coarse.dim, coarse.level + 1, coarse.ncomp);
    let n = coarse.side() as i64;
    let dim = coarse.dim;
    let count = 3usize.pow(dim as u32);
    let mut idx = [0i64; MAX_DIM];
    for_each_cell(dim, n, &mut idx, &mut |c| {
        let mut stencil = Vec::with_capacity(count);
        for lin in 0..count {
            let mut rem = lin;
            let mut cc = c;
            for axis in 0..dim {
                let off = (rem % 3) as i64 - 1;
                rem /= 3;
                cc[axis] += off;
            }
            stencil.push(coarse.get_ghost(cc, ghost));
        }
        for s in 0..(1usize << dim) {
            let v = predict_child(&stencil, dim, s);
            let mut fc = [0i64; MAX_DIM];
            for axis in 0..dim {
                fc[axis] = 2 * c[axis] + ((s >> axis) & 1) as i64;
            }
            fine.set(fc, &v);
        }
    });
    fine
}

fn for_each_cell(dim: usize, n: i64, idx: &mut [i64; MAX_DIM], f: &mut impl FnMut([i64; MAX_DIM])) {
    fn rec(
        dim: usize,
        n: i64,
        axis: usize,
        idx: &mut [i64; MAX_DIM],
        f: &mut impl FnMut([i64; MAX_DIM]),
    ) {
        if axis == dim {
            f(*idx);
            return;
        }
        for c in 0..n {
            idx[axis] = c;
            rec(dim, n, axis + 1, idx, f);
        }
    }
    rec(dim, n, 0, idx, f);
}

/// Multiresolution transform of a uniform level-L field: detail fields for
/// levels L down to 1 plus the root average. Invertible by
/// `inverse_transform`.
pub fn mr_transform(fine: &DenseField, ghost: &GhostSpec) -> (Vec<DenseField>, State) {
    let mut details: Vec<DenseField> = Vec::with_capacity(fine.level as usize);
    let mut cur = fine.clone();
    while cur.level > 0 {
        let coarse = dense_project(&cur);
        let pred = dense_predict(&coarse, ghost);
        let mut d = DenseField::zeros(cur.dim, cur.level, cur.ncomp);
        for (k, (a, p)) in cur.data.iter().zip(pred.data.iter()).enumerate() {
            d.data[k] = a - p;
        }
        details.push(d);
        cur = coarse;
    }
    details.reverse(); // index 0 holds level 1
    (details, cur.get([0; MAX_DIM]))
}

/// Exact reconstruction: child = prediction + detail, level by level.
pub fn inverse_transform(details: &[DenseField], root: &State, ghost: &GhostSpec) -> DenseField {
    let dim = details.first().map(|d| d.dim).unwrap_or(1);
    let ncomp = root.len();
    let mut cur = DenseField::zeros(dim, 0, ncomp);
    cur.set([0; MAX_DIM], root);
    for d in details {
        let mut pred = dense_predict(&cur, ghost);
        for (k, dv) in d.data.iter().enumerate() {
            pred.data[k] += dv;
        }
        cur = pred;
    }
    cur
}

/// Reconstruct the tree's leaf field onto the uniform grid at `level`:
/// exact averages at and above the leaves, zero-detail prediction below.
pub fn reconstruct_to_level(
    tree: &GradedTree,
    slot: Slot,
    level: u8,
    ghost: &GhostSpec,
) -> DenseField {
    let mut memo: HashMap<CellIndex, State> = HashMap::new();
    let root_avg = subtree_average(tree, CellIndex::root(), slot, &mut memo);
    let mut cur = DenseField::zeros(tree.dim, 0, tree.ncomp);
    cur.set([0; MAX_DIM], &root_avg);
    for l in 1..=level {
        let mut next = dense_predict(&cur, ghost);
        let n = next.side() as i64;
        let mut idx = [0i64; MAX_DIM];
        for_each_cell(tree.dim, n, &mut idx, &mut |c| {
            let ci = CellIndex::new(l, [c[0] as u32, c[1] as u32, c[2] as u32]);
            if let Some(rec) = tree.nodes.get(&ci) {
                if rec.kind != NodeKind::VirtualLeaf {
                    let v = subtree_average(tree, ci, slot, &mut memo);
                    next.set(c, &v);
                }
            }
        });
        cur = next;
    }
    cur
}

fn subtree_average(
    tree: &GradedTree,
    idx: CellIndex,
    slot: Slot,
    memo: &mut HashMap<CellIndex, State>,
) -> State {
    if let Some(v) = memo.get(&idx) {
        return v.clone();
    }
    let rec = tree.record(idx);
    let v = match rec.kind {
        NodeKind::Leaf | NodeKind::VirtualLeaf => rec.slot(slot).clone(),
        NodeKind::Internal => {
            let children = tree.children(idx).expect("internal has children");
            let vals: Vec<State> = children
                .iter()
                .map(|c| subtree_average(tree, *c, slot, memo))
                .collect();
            project(&vals)
        }
    };
    memo.insert(idx, v.clone());
    v
}
