use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::state::{self, Slot, State};

pub const MAX_DIM: usize = 3;

/// Address of one cell in the dyadic hierarchy: refinement level and
/// per-axis integer coordinates in [0, 2^level). Unused axes stay 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub level: u8,
    pub coords: [u32; MAX_DIM],
}

impl CellIndex {
    pub fn new(level: u8, coords: [u32; MAX_DIM]) -> Self {
        CellIndex { level, coords }
    }

    pub fn root() -> Self {
        CellIndex { level: 0, coords: [0; MAX_DIM] }
    }

    pub fn d1(level: u8, i: u32) -> Self {
        CellIndex { level, coords: [i, 0, 0] }
    }

    pub fn d2(level: u8, i: u32, j: u32) -> Self {
        CellIndex { level, coords: [i, j, 0] }
    }

    pub fn parent(&self) -> Option<CellIndex> {
        if self.level == 0 {
            return None;
        }
        let mut c = [0u32; MAX_DIM];
        for (k, v) in c.iter_mut().zip(self.coords.iter()) {
            *k = v / 2;
        }
        Some(CellIndex { level: self.level - 1, coords: c })
    }

    /// Which of the 2^d children of its parent this cell is (bit per axis).
    pub fn child_slot(&self, dim: usize) -> usize {
        let mut s = 0usize;
        for axis in 0..dim {
            s |= ((self.coords[axis] & 1) as usize) << axis;
        }
        s
    }

    pub fn fmt_short(&self, dim: usize) -> String {
        let c: Vec<String> = self.coords[..dim].iter().map(|v| v.to_string()).collect();
        format!("({},{})", self.level, c.join(","))
    }
}

/// The 2^d dyadic children of `idx`; in 1-D these are (l+1, 2i) and (l+1, 2i+1).
pub fn child_indices(idx: CellIndex, dim: usize, max_level: u8) -> Result<Vec<CellIndex>> {
    if idx.level >= max_level {
        return Err(Error::LevelOverflow(idx.level));
    }
    let n = 1usize << dim;
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let mut c = [0u32; MAX_DIM];
        for axis in 0..dim {
            c[axis] = idx.coords[axis] * 2 + ((s >> axis) & 1) as u32;
        }
        out.push(CellIndex { level: idx.level + 1, coords: c });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Internal,
    Leaf,
    VirtualLeaf,
}

/// Per-cell storage: node kind, logical clock and every stage buffer the
/// compact RK/NERK machinery touches.
#[derive(Debug, Clone)]
pub struct CellRecord {
    pub kind: NodeKind,
    /// Time instant of `q_n` in units of the finest time step, counted from
    /// the start of the current coarse cycle.
    pub clock: u64,
    pub q_n: State,
    pub q_star: State,
    pub q_dstar: State,
    pub nerk_quarter: State,
    pub nerk_half: State,
    pub nerk_threequarter: State,
    pub detail: State,
    pub flux_acc: State,
}

impl CellRecord {
    pub fn new(kind: NodeKind, ncomp: usize) -> Self {
        CellRecord {
            kind,
            clock: 0,
            q_n: state::zeros(ncomp),
            q_star: state::zeros(ncomp),
            q_dstar: state::zeros(ncomp),
            nerk_quarter: state::zeros(ncomp),
            nerk_half: state::zeros(ncomp),
            nerk_threequarter: state::zeros(ncomp),
            detail: state::zeros(ncomp),
            flux_acc: state::zeros(ncomp),
        }
    }

    pub fn slot(&self, s: Slot) -> &State {
        match s {
            Slot::QN => &self.q_n,
            Slot::QStar => &self.q_star,
            Slot::QDstar => &self.q_dstar,
            Slot::NerkQuarter => &self.nerk_quarter,
            Slot::NerkHalf => &self.nerk_half,
            Slot::NerkThreeQuarter => &self.nerk_threequarter,
        }
    }

    pub fn slot_mut(&mut self, s: Slot) -> &mut State {
        match s {
            Slot::QN => &mut self.q_n,
            Slot::QStar => &mut self.q_star,
            Slot::QDstar => &mut self.q_dstar,
            Slot::NerkQuarter => &mut self.nerk_quarter,
            Slot::NerkHalf => &mut self.nerk_half,
            Slot::NerkThreeQuarter => &mut self.nerk_threequarter,
        }
    }
}

/// How a leaf finds its interface partner across one face.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FluxPartner {
    SameLevelLeaf(CellIndex),
    SameLevelVirtual(CellIndex),
    /// The leaf's own virtual children adjacent to the face, each paired with
    /// the neighboring finer leaf across the face.
    FinerViaVirtualChildren(Vec<(CellIndex, CellIndex)>),
}

/// Per-level index lists, sorted, rebuilt after topology changes.
#[derive(Debug, Default, Clone)]
pub struct LevelLists {
    pub leaves: Vec<CellIndex>,
    pub internals: Vec<CellIndex>,
    pub virtuals: Vec<CellIndex>,
}

/// Dynamic graded dyadic tree over a rectangular domain.
#[derive(Debug, Clone)]
pub struct GradedTree {
    pub dim: usize,
    pub max_level: u8,
    pub lo: [f64; MAX_DIM],
    pub hi: [f64; MAX_DIM],
    pub periodic: [bool; MAX_DIM],
    pub ncomp: usize,
    pub nodes: HashMap<CellIndex, CellRecord>,
    lists: Vec<LevelLists>,
    lists_dirty: bool,
}

impl GradedTree {
    pub fn new(
        dim: usize,
        max_level: u8,
        lo: [f64; MAX_DIM],
        hi: [f64; MAX_DIM],
        periodic: [bool; MAX_DIM],
        ncomp: usize,
    ) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        let mut nodes = HashMap::new();
        nodes.insert(CellIndex::root(), CellRecord::new(NodeKind::Leaf, ncomp));
        GradedTree {
            dim,
            max_level,
            lo,
            hi,
            periodic,
            ncomp,
            nodes,
            lists: Vec::new(),
            lists_dirty: true,
        }
    }

    /// Uniform tree fully refined to `level`: internal nodes above, leaves at `level`.
    pub fn new_uniform(
        dim: usize,
        max_level: u8,
        level: u8,
        lo: [f64; MAX_DIM],
        hi: [f64; MAX_DIM],
        periodic: [bool; MAX_DIM],
        ncomp: usize,
    ) -> Self {
        assert!(level <= max_level);
        let mut t = GradedTree::new(dim, max_level, lo, hi, periodic, ncomp);
        for l in 0..level {
            let idxs: Vec<CellIndex> = t
                .nodes
                .iter()
                .filter(|(i, r)| i.level == l && r.kind == NodeKind::Leaf)
                .map(|(i, _)| *i)
                .collect();
            for idx in idxs {
                t.split_into_leaves(idx);
            }
        }
        t.rebuild_lists();
        t
    }

    pub fn width(&self, level: u8, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (1u64 << level) as f64
    }

    pub fn cell_volume(&self, level: u8) -> f64 {
        (0..self.dim).map(|a| self.width(level, a)).product()
    }

    pub fn center(&self, idx: CellIndex) -> [f64; MAX_DIM] {
        let mut c = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            c[axis] = self.lo[axis] + (idx.coords[axis] as f64 + 0.5) * self.width(idx.level, axis);
        }
        c
    }

    pub fn kind(&self, idx: CellIndex) -> Option<NodeKind> {
        self.nodes.get(&idx).map(|r| r.kind)
    }

    pub fn record(&self, idx: CellIndex) -> &CellRecord {
        &self.nodes[&idx]
    }

    pub fn record_mut(&mut self, idx: CellIndex) -> &mut CellRecord {
        self.nodes.get_mut(&idx).expect("cell present")
    }

    pub fn children(&self, idx: CellIndex) -> Result<Vec<CellIndex>> {
        child_indices(idx, self.dim, self.max_level)
    }

    /// Neighbor at the same level, wrapping on periodic axes, None at a wall.
    pub fn same_level_neighbor(&self, idx: CellIndex, axis: usize, side: i32) -> Option<CellIndex> {
        debug_assert!(axis < self.dim);
        let n = 1i64 << idx.level;
        let mut c = idx.coords[axis] as i64 + side as i64;
        if c < 0 || c >= n {
            if self.periodic[axis] {
                c = c.rem_euclid(n);
            } else {
                return None;
            }
        }
        let mut coords = idx.coords;
        coords[axis] = c as u32;
        Some(CellIndex { level: idx.level, coords })
    }

    pub fn mark_dirty(&mut self) {
        self.lists_dirty = true;
    }

    pub fn rebuild_lists(&mut self) {
        let mut lists = vec![LevelLists::default(); self.max_level as usize + 1];
        for (idx, rec) in &self.nodes {
            let l = &mut lists[idx.level as usize];
            match rec.kind {
                NodeKind::Leaf => l.leaves.push(*idx),
                NodeKind::Internal => l.internals.push(*idx),
                NodeKind::VirtualLeaf => l.virtuals.push(*idx),
            }
        }
        for l in &mut lists {
            l.leaves.sort_unstable();
            l.internals.sort_unstable();
            l.virtuals.sort_unstable();
        }
        self.lists = lists;
        self.lists_dirty = false;
    }

    pub fn level_lists(&self, level: u8) -> &LevelLists {
        assert!(!self.lists_dirty, "level lists are stale; call rebuild_lists");
        &self.lists[level as usize]
    }

    pub fn all_leaves(&self) -> Vec<CellIndex> {
        let mut v: Vec<CellIndex> = self
            .nodes
            .iter()
            .filter(|(_, r)| r.kind == NodeKind::Leaf)
            .map(|(i, _)| *i)
            .collect();
        v.sort_unstable();
        v
    }

    /// Coarsest level holding at least one leaf.
    pub fn coarsest_leaf_level(&self) -> u8 {
        self.nodes
            .iter()
            .filter(|(_, r)| r.kind == NodeKind::Leaf)
            .map(|(i, _)| i.level)
            .min()
            .unwrap_or(0)
    }

    pub fn finest_leaf_level(&self) -> u8 {
        self.nodes
            .iter()
            .filter(|(_, r)| r.kind == NodeKind::Leaf)
            .map(|(i, _)| i.level)
            .max()
            .unwrap_or(0)
    }

    /// Turn a leaf into an internal node with 2^d leaf children.
    /// Existing virtual children are promoted to real leaves, keeping their data.
    /// Values for newly created children are NOT set here.
    pub fn split_into_leaves(&mut self, idx: CellIndex) -> Vec<CellIndex> {
        let clock = self.record(idx).clock;
        debug_assert_eq!(self.record(idx).kind, NodeKind::Leaf);
        let children = self.children(idx).expect("split below max level");
        for ch in &children {
            match self.nodes.get_mut(ch) {
                Some(r) => {
                    r.kind = NodeKind::Leaf;
                    r.clock = clock;
                }
                None => {
                    let mut r = CellRecord::new(NodeKind::Leaf, self.ncomp);
                    r.clock = clock;
                    self.nodes.insert(*ch, r);
                }
            }
        }
        self.record_mut(idx).kind = NodeKind::Internal;
        self.mark_dirty();
        children
    }

    /// Remove the (leaf) children of `parent` and make it a leaf again,
    /// inheriting their logical clock. Any virtual grandchildren hanging
    /// below the removed leaves are dropped.
    pub fn merge_children(&mut self, parent: CellIndex) {
        let children = self.children(parent).expect("children exist");
        let clock = self.record(children[0]).clock;
        self.record_mut(parent).clock = clock;
        for ch in &children {
            if let Ok(grand) = self.children(*ch) {
                for g in grand {
                    if self.kind(g) == Some(NodeKind::VirtualLeaf) {
                        self.nodes.remove(&g);
                    }
                }
            }
            self.nodes.remove(ch);
        }
        self.record_mut(parent).kind = NodeKind::Leaf;
        self.mark_dirty();
    }

    /// (leaf count, virtual count, 100 * leaves / 2^{L d}).
    pub fn leaf_statistics(&self) -> (usize, usize, f64) {
        let mut leaves = 0usize;
        let mut virtuals = 0usize;
        for r in self.nodes.values() {
            match r.kind {
                NodeKind::Leaf => leaves += 1,
                NodeKind::VirtualLeaf => virtuals += 1,
                NodeKind::Internal => {}
            }
        }
        let full = (1u128 << (self.max_level as u32 * self.dim as u32)) as f64;
        (leaves, virtuals, 100.0 * leaves as f64 / full)
    }

    /// Resolve the flux partner of `leaf` across face (axis, side).
    pub fn find_flux_partner(
        &self,
        leaf: CellIndex,
        axis: usize,
        side: i32,
    ) -> Result<FluxPartner> {
        let nb = self
            .same_level_neighbor(leaf, axis, side)
            .ok_or_else(|| Error::BoundaryFace(leaf.fmt_short(self.dim)))?;
        match self.kind(nb) {
            Some(NodeKind::Leaf) => Ok(FluxPartner::SameLevelLeaf(nb)),
            Some(NodeKind::VirtualLeaf) => Ok(FluxPartner::SameLevelVirtual(nb)),
            Some(NodeKind::Internal) => {
                // Flux goes through our own virtual children paired with the
                // neighbor's leaf children adjacent to the shared face.
                let own = self.face_children(leaf, axis, side)?;
                let mut pairs = Vec::with_capacity(own.len());
                for vc in own {
                    if self.kind(vc) != Some(NodeKind::VirtualLeaf) {
                        return Err(Error::Ungraded(format!(
                            "missing virtual child {} of {}",
                            vc.fmt_short(self.dim),
                            leaf.fmt_short(self.dim)
                        )));
                    }
                    let fine = self
                        .same_level_neighbor(vc, axis, side)
                        .expect("interior face");
                    match self.kind(fine) {
                        Some(NodeKind::Leaf) | Some(NodeKind::VirtualLeaf) => {}
                        _ => {
                            return Err(Error::Ungraded(format!(
                                "neighbor of {} across axis {} differs by more than one level",
                                leaf.fmt_short(self.dim),
                                axis
                            )))
                        }
                    }
                    pairs.push((vc, fine));
                }
                Ok(FluxPartner::FinerViaVirtualChildren(pairs))
            }
            None => Err(Error::Ungraded(format!(
                "no cell at {} next to {}",
                nb.fmt_short(self.dim),
                leaf.fmt_short(self.dim)
            ))),
        }
    }

    /// Children of `idx` touching face (axis, side).
    pub fn face_children(&self, idx: CellIndex, axis: usize, side: i32) -> Result<Vec<CellIndex>> {
        let bit = if side > 0 { 1u32 } else { 0u32 };
        Ok(self
            .children(idx)?
            .into_iter()
            .filter(|c| c.coords[axis] & 1 == bit)
            .collect())
    }

    /// True when the region across face (axis, side) is covered by finer leaves.
    pub fn has_finer_face_neighbor(&self, leaf: CellIndex, axis: usize, side: i32) -> bool {
        match self.same_level_neighbor(leaf, axis, side) {
            Some(nb) => self.kind(nb) == Some(NodeKind::Internal),
            None => false,
        }
    }

    pub fn needs_virtual_children(&self, leaf: CellIndex) -> bool {
        if leaf.level >= self.max_level {
            return false;
        }
        for axis in 0..self.dim {
            for side in [-1, 1] {
                if self.has_finer_face_neighbor(leaf, axis, side) {
                    return true;
                }
            }
        }
        false
    }

    /// Exhaustive face scan of the gradedness invariant.
    pub fn check_graded(&self) -> Result<()> {
        for (idx, rec) in &self.nodes {
            if rec.kind != NodeKind::Leaf {
                continue;
            }
            for axis in 0..self.dim {
                for side in [-1, 1] {
                    if let Some(nb) = self.same_level_neighbor(*idx, axis, side) {
                        if let Some(NodeKind::Internal) = self.kind(nb) {
                            // neighbor leaves are one level finer; make sure not two.
                            for fc in self.face_children(nb, axis, -side)? {
                                if self.kind(fc) == Some(NodeKind::Internal) {
                                    return Err(Error::Ungraded(idx.fmt_short(self.dim)));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Structural fingerprint used by idempotence tests.
    pub fn topology(&self) -> Vec<(CellIndex, NodeKind)> {
        let mut v: Vec<(CellIndex, NodeKind)> = self.nodes.iter().map(|(i, r)| (*i, r.kind)).collect();
        v.sort_unstable_by_key(|(i, _)| *i);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_indices_1d() {
        let c = child_indices(CellIndex::d1(2, 3), 1, 8).unwrap();
        assert_eq!(c, vec![CellIndex::d1(3, 6), CellIndex::d1(3, 7)]);
        let r = child_indices(CellIndex::d1(0, 0), 1, 8).unwrap();
        assert_eq!(r, vec![CellIndex::d1(1, 0), CellIndex::d1(1, 1)]);
    }

    #[test]
    fn child_indices_2d_root() {
        let c = child_indices(CellIndex::root(), 2, 8).unwrap();
        assert_eq!(
            c,
            vec![
                CellIndex::d2(1, 0, 0),
                CellIndex::d2(1, 1, 0),
                CellIndex::d2(1, 0, 1),
                CellIndex::d2(1, 1, 1),
            ]
        );
    }

    #[test]
    fn child_indices_overflow() {
        assert!(child_indices(CellIndex::d1(4, 0), 1, 4).is_err());
    }

    #[test]
    fn parent_round_trip() {
        for dim in 1..=3usize {
            let mut coords = [0u32; MAX_DIM];
            for (axis, c) in [5u32, 2, 7].iter().enumerate().take(dim) {
                coords[axis] = *c;
            }
            let idx = CellIndex::new(3, coords);
            for ch in child_indices(idx, dim, 8).unwrap() {
                assert_eq!(ch.parent().unwrap(), idx);
            }
        }
    }

    fn tree_1d(periodic: bool) -> GradedTree {
        GradedTree::new(
            1,
            8,
            [0.0; MAX_DIM],
            [1.0, 1.0, 1.0],
            [periodic, false, false],
            1,
        )
    }

    #[test]
    fn neighbor_boundary_and_wrap() {
        let t = tree_1d(false);
        assert_eq!(t.same_level_neighbor(CellIndex::d1(3, 0), 0, -1), None);
        let tp = tree_1d(true);
        assert_eq!(
            tp.same_level_neighbor(CellIndex::d1(3, 0), 0, -1),
            Some(CellIndex::d1(3, 7))
        );
        let t2 = GradedTree::new(2, 8, [0.0; 3], [1.0; 3], [false; 3], 1);
        assert_eq!(
            t2.same_level_neighbor(CellIndex::d2(2, 1, 1), 0, 1),
            Some(CellIndex::d2(2, 2, 1))
        );
    }

    #[test]
    fn uniform_stats() {
        let t = GradedTree::new_uniform(1, 4, 4, [0.0; 3], [1.0; 3], [false; 3], 1);
        let (leaves, _virt, pct) = t.leaf_statistics();
        assert_eq!(leaves, 16);
        assert!((pct - 100.0).abs() < 1e-12);
    }

    #[test]
    fn single_root_compression() {
        let t = GradedTree::new(2, 10, [0.0; 3], [1.0; 3], [false; 3], 1);
        let (leaves, _v, pct) = t.leaf_statistics();
        assert_eq!(leaves, 1);
        assert!((pct - 100.0 / (1u64 << 20) as f64).abs() < 1e-15);
    }

    /// Adapted 1-D grid with leaves at levels {4,4,4,4,3,3,2,2}: four finest
    /// leaves on the first quarter, two level-3 leaves on the second, two
    /// level-2 leaves on the right half. Virtual children sit under every
    /// leaf facing a finer neighbor.
    fn adapted_example_tree() -> GradedTree {
        let mut t = GradedTree::new(1, 4, [0.0; MAX_DIM], [1.0; MAX_DIM], [false; MAX_DIM], 1);
        t.split_into_leaves(CellIndex::root()); // (1,0), (1,1)
        t.split_into_leaves(CellIndex::d1(1, 0)); // (2,0), (2,1)
        t.split_into_leaves(CellIndex::d1(1, 1)); // (2,2), (2,3) leaves
        t.split_into_leaves(CellIndex::d1(2, 0)); // (3,0), (3,1)
        t.split_into_leaves(CellIndex::d1(3, 0)); // (4,0), (4,1) leaves
        t.split_into_leaves(CellIndex::d1(3, 1)); // (4,2), (4,3) leaves
        t.split_into_leaves(CellIndex::d1(2, 1)); // (3,2), (3,3) leaves
        for v in [
            CellIndex::d1(4, 4),
            CellIndex::d1(4, 5),
            CellIndex::d1(3, 4),
            CellIndex::d1(3, 5),
        ] {
            t.nodes.insert(v, CellRecord::new(NodeKind::VirtualLeaf, 1));
        }
        t.rebuild_lists();
        t
    }

    #[test]
    fn flux_partner_scenarios() {
        let t = adapted_example_tree();
        t.check_graded().unwrap();
        // Leaf/Leaf at the same level
        match t.find_flux_partner(CellIndex::d1(3, 2), 0, 1).unwrap() {
            FluxPartner::SameLevelLeaf(nb) => assert_eq!(nb, CellIndex::d1(3, 3)),
            other => panic!("expected SameLevelLeaf, got {other:?}"),
        }
        // Leaf/Virtual leaf: finest leaf next to the virtual child of (3,2)
        match t.find_flux_partner(CellIndex::d1(4, 3), 0, 1).unwrap() {
            FluxPartner::SameLevelVirtual(nb) => assert_eq!(nb, CellIndex::d1(4, 4)),
            other => panic!("expected SameLevelVirtual, got {other:?}"),
        }
        // Leaf/Internal: coarse leaf (2,2) facing the internal (2,1) resolves
        // through its own virtual children.
        match t.find_flux_partner(CellIndex::d1(2, 2), 0, -1).unwrap() {
            FluxPartner::FinerViaVirtualChildren(pairs) => {
                assert_eq!(pairs, vec![(CellIndex::d1(3, 4), CellIndex::d1(3, 3))]);
            }
            other => panic!("expected FinerViaVirtualChildren, got {other:?}"),
        }
        // boundary face
        assert!(t.find_flux_partner(CellIndex::d1(4, 0), 0, -1).is_err());
    }

    #[test]
    fn leaf_statistics_half_full() {
        // 8 leaves over 2^4 finest cells: 50 percent.
        let t = adapted_example_tree();
        let (leaves, virtuals, pct) = t.leaf_statistics();
        assert_eq!(leaves, 8);
        assert_eq!(virtuals, 4);
        assert!((pct - 50.0).abs() < 1e-12);
    }
}
