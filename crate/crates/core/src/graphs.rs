//! Finite graphs, translation groups and random vertex subsets.
//!
//! Lattice vertices are indexed row-major: on a `dim`-dimensional torus or
//! box of side `s`, the vertex with coordinates `(x_0, …, x_{d-1})` has index
//! `((x_0·s + x_1)·s + …)·s + x_{d-1}`. Masks are therefore portable between
//! runs and between the library and the CLI.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitSet;
use crate::error::{Error, Result};
use crate::rng::SpinRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Cycle {
        n: usize,
    },
    Torus {
        dim: usize,
        side: usize,
    },
    /// Open box `[0, side)^dim` with nearest-neighbour edges; `dim = 1` is a path.
    Box {
        dim: usize,
        side: usize,
    },
    Complete {
        n: usize,
    },
    Custom {
        n: usize,
        edges: Vec<(usize, usize)>,
        #[serde(default)]
        translations: Option<Vec<Vec<usize>>>,
    },
}

/// A transitive group of vertex permutations, stored implicitly for lattices.
#[derive(Clone, Debug)]
pub enum TranslationGroup {
    /// `v ↦ v + g mod n`.
    Rotations { n: usize },
    /// All lattice shifts of a torus.
    TorusShifts { dim: usize, side: usize },
    Explicit(Vec<Vec<usize>>),
}

impl TranslationGroup {
    pub fn order(&self) -> usize {
        match self {
            TranslationGroup::Rotations { n } => *n,
            TranslationGroup::TorusShifts { dim, side } => side.pow(*dim as u32),
            TranslationGroup::Explicit(p) => p.len(),
        }
    }

    /// Image of vertex `v` under group element `g`.
    #[inline]
    pub fn apply(&self, g: usize, v: usize) -> usize {
        match self {
            TranslationGroup::Rotations { n } => (v + g) % n,
            TranslationGroup::TorusShifts { dim, side } => {
                // shift index g is itself a row-major coordinate vector
                let (mut v, mut g) = (v, g);
                let mut out = 0;
                let mut place = 1;
                for _ in 0..*dim {
                    let x = (v % side + g % side) % side;
                    out += x * place;
                    place *= side;
                    v /= side;
                    g /= side;
                }
                out
            }
            TranslationGroup::Explicit(p) => p[g][v],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Graph {
    spec: GraphSpec,
    n: usize,
    edges: Vec<(usize, usize)>,
    translations: Option<TranslationGroup>,
    adj_offsets: Vec<usize>,
    adj: Vec<(u32, u32)>,
}

impl Graph {
    pub fn build(spec: GraphSpec) -> Result<Graph> {
        let (n, edges, translations) = match &spec {
            GraphSpec::Cycle { n } => {
                if *n < 3 {
                    return Err(Error::InvalidGraph(format!("cycle needs n >= 3, got {n}")));
                }
                let edges = (0..*n).map(|i| ordered(i, (i + 1) % n)).collect();
                (*n, edges, Some(TranslationGroup::Rotations { n: *n }))
            }
            GraphSpec::Torus { dim, side } => {
                if *side < 3 {
                    return Err(Error::InvalidGraph(format!(
                        "torus side must be >= 3 to avoid duplicate edges, got {side}"
                    )));
                }
                let n = lattice_size(*dim, *side)?;
                let mut edges = Vec::with_capacity(n * dim);
                for v in 0..n {
                    let mut place = 1;
                    for _ in 0..*dim {
                        let x = (v / place) % side;
                        let w = v - x * place + ((x + 1) % side) * place;
                        edges.push(ordered(v, w));
                        place *= side;
                    }
                }
                (n, edges, Some(TranslationGroup::TorusShifts { dim: *dim, side: *side }))
            }
            GraphSpec::Box { dim, side } => {
                if *side < 1 {
                    return Err(Error::InvalidGraph("box side must be >= 1".into()));
                }
                let n = lattice_size(*dim, *side)?;
                let mut edges = Vec::new();
                for v in 0..n {
                    let mut place = 1;
                    for _ in 0..*dim {
                        let x = (v / place) % side;
                        if x + 1 < *side {
                            edges.push((v, v + place));
                        }
                        place *= side;
                    }
                }
                (n, edges, None)
            }
            GraphSpec::Complete { n } => {
                if *n < 1 {
                    return Err(Error::InvalidGraph("complete graph needs n >= 1".into()));
                }
                let mut edges = Vec::with_capacity(n * (n - 1) / 2);
                for u in 0..*n {
                    for v in u + 1..*n {
                        edges.push((u, v));
                    }
                }
                (*n, edges, Some(TranslationGroup::Rotations { n: *n }))
            }
            GraphSpec::Custom { n, edges, translations } => {
                let edges: Vec<_> = edges.iter().map(|&(a, b)| ordered(a, b)).collect();
                (*n, edges, translations.clone().map(TranslationGroup::Explicit))
            }
        };
        if n > u32::MAX as usize {
            return Err(Error::InvalidGraph("vertex count overflows index width".into()));
        }
        let mut edges = edges;
        if !matches!(spec, GraphSpec::Custom { .. }) {
            edges.sort_unstable();
        }
        let graph = Self::assemble(spec, n, edges, translations)?;
        graph.validate()?;
        Ok(graph)
    }

    pub fn cycle(n: usize) -> Result<Graph> {
        Self::build(GraphSpec::Cycle { n })
    }

    pub fn torus(dim: usize, side: usize) -> Result<Graph> {
        Self::build(GraphSpec::Torus { dim, side })
    }

    pub fn lattice_box(dim: usize, side: usize) -> Result<Graph> {
        Self::build(GraphSpec::Box { dim, side })
    }

    pub fn path(n: usize) -> Result<Graph> {
        Self::build(GraphSpec::Box { dim: 1, side: n })
    }

    pub fn complete(n: usize) -> Result<Graph> {
        Self::build(GraphSpec::Complete { n })
    }

    pub fn custom(n: usize, edges: Vec<(usize, usize)>) -> Result<Graph> {
        Self::build(GraphSpec::Custom { n, edges, translations: None })
    }

    fn assemble(
        spec: GraphSpec,
        n: usize,
        edges: Vec<(usize, usize)>,
        translations: Option<TranslationGroup>,
    ) -> Result<Graph> {
        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u},{v}) out of range")));
            }
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut adj_offsets = vec![0usize; n + 1];
        for v in 0..n {
            adj_offsets[v + 1] = adj_offsets[v] + degree[v];
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![(0u32, 0u32); adj_offsets[n]];
        for (e, &(u, v)) in edges.iter().enumerate() {
            adj[fill[u]] = (v as u32, e as u32);
            fill[u] += 1;
            adj[fill[v]] = (u as u32, e as u32);
            fill[v] += 1;
        }
        Ok(Graph { spec, n, edges, translations, adj_offsets, adj })
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::with_capacity(self.edges.len());
        for &(u, v) in &self.edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at {u}")));
            }
            if !seen.insert((u, v)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u},{v})")));
            }
        }
        if let Some(TranslationGroup::Explicit(perms)) = &self.translations {
            for p in perms {
                if p.len() != self.n {
                    return Err(Error::InvalidGraph("translation has wrong length".into()));
                }
                let mut hit = vec![false; self.n];
                for &x in p {
                    if x >= self.n || std::mem::replace(&mut hit[x], true) {
                        return Err(Error::InvalidGraph("translation is not a permutation".into()));
                    }
                }
                for &(u, v) in &self.edges {
                    if !seen.contains(&ordered(p[u], p[v])) {
                        return Err(Error::InvalidGraph(format!(
                            "translation does not preserve edge ({u},{v})"
                        )));
                    }
                }
            }
            let mut orbit = vec![false; self.n];
            for p in perms {
                orbit[p[0]] = true;
            }
            if self.n > 0 && !orbit.iter().all(|&b| b) {
                return Err(Error::InvalidGraph("translation group is not transitive".into()));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.spec
    }

    #[inline]
    pub fn n_vertices(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn translations(&self) -> Option<&TranslationGroup> {
        self.translations.as_ref()
    }

    /// `(neighbour, edge index)` pairs of `v`.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[(u32, u32)] {
        &self.adj[self.adj_offsets[v]..self.adj_offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.adj_offsets[v + 1] - self.adj_offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// `(dim, side)` for tori, cycles and boxes.
    pub fn lattice(&self) -> Option<(usize, usize)> {
        match self.spec {
            GraphSpec::Cycle { n } => Some((1, n)),
            GraphSpec::Torus { dim, side } | GraphSpec::Box { dim, side } => Some((dim, side)),
            _ => None,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.spec, GraphSpec::Cycle { .. } | GraphSpec::Torus { .. })
    }

    /// Row-major coordinates of `v` (most significant axis first).
    pub fn coords(&self, v: usize) -> Option<Vec<usize>> {
        let (dim, side) = self.lattice()?;
        let mut c = vec![0; dim];
        let mut r = v;
        for i in (0..dim).rev() {
            c[i] = r % side;
            r /= side;
        }
        Some(c)
    }

    pub fn index_of(&self, coords: &[usize]) -> Option<usize> {
        let (dim, side) = self.lattice()?;
        if coords.len() != dim {
            return None;
        }
        Some(coords.iter().fold(0, |acc, &x| acc * side + x))
    }
}

impl Serialize for Graph {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = GraphSpec::deserialize(d)?;
        Graph::build(spec).map_err(serde::de::Error::custom)
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn lattice_size(dim: usize, side: usize) -> Result<usize> {
    if dim == 0 {
        return Err(Error::InvalidGraph("dimension must be >= 1".into()));
    }
    side.checked_pow(dim as u32)
        .filter(|&n| n <= u32::MAX as usize)
        .ok_or_else(|| Error::InvalidGraph(format!("side^dim = {side}^{dim} overflows vertex index width")))
}

// ---------------------------------------------------------------------------
// Vertex subsets

/// One realized vertex subset.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SubsetMask(BitSet);

impl SubsetMask {
    pub fn empty(n: usize) -> Self {
        Self(BitSet::new(n))
    }

    pub fn full(n: usize) -> Self {
        Self(BitSet::full(n))
    }

    pub fn from_indices(n: usize, vertices: &[usize]) -> Self {
        Self(BitSet::from_indices(n, vertices))
    }

    pub fn from_bits(n: usize, bits: u64) -> Self {
        Self(BitSet::from_u64(n, bits))
    }

    pub fn n_vertices(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn contains(&self, v: usize) -> bool {
        self.0.contains(v)
    }

    pub fn insert(&mut self, v: usize) {
        self.0.insert(v)
    }

    pub fn count(&self) -> usize {
        self.0.count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.count() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter()
    }

    pub fn to_indices(&self) -> Vec<usize> {
        self.0.iter().collect()
    }

    pub fn to_bits(&self) -> u64 {
        self.0.as_u64()
    }

    pub fn complement(&self) -> Self {
        Self(self.0.complement())
    }

    pub fn union_with(&mut self, other: &SubsetMask) {
        self.0.union_with(&other.0)
    }

    pub fn is_subset(&self, other: &SubsetMask) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn bits(&self) -> &BitSet {
        &self.0
    }
}

impl Serialize for SubsetMask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter())
    }
}

/// How the removed cubes of a tiled subset are laid out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TilingLayout {
    /// Cubes at every point of the lattice `(L+3)ℤ^d`; the complement is a
    /// disjoint union of boxes of side at most `L`.
    #[default]
    FullLattice,
    /// Cubes translated only along the coordinate axes. Kept for comparison;
    /// no structural property is asserted for it.
    AxisOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSubset {
    pub vertices: Vec<usize>,
    pub prob: f64,
}

/// A distribution over vertex subsets (the random set U).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubsetSpec {
    Fixed {
        vertices: Vec<usize>,
    },
    /// Each vertex independently, with probability `p` or `per_vertex[v]`.
    Bernoulli {
        p: f64,
        #[serde(default)]
        per_vertex: Option<Vec<f64>>,
    },
    UniformK {
        k: usize,
    },
    /// A uniformly random translate of `base` under the graph's translation group.
    UniformTranslate {
        base: Vec<usize>,
    },
    /// Uniformly shifted grid: every vertex outside the cubes `[0, l)^d + (l+3)z + w`.
    Tiled {
        l: usize,
        #[serde(default)]
        layout: TilingLayout,
    },
    /// Union of `k` independent draws of `inner`.
    UnionOfCopies {
        inner: Box<SubsetSpec>,
        k: usize,
    },
    Explicit {
        subsets: Vec<WeightedSubset>,
    },
}

impl SubsetSpec {
    pub fn fixed(vertices: &[usize]) -> Self {
        SubsetSpec::Fixed { vertices: vertices.to_vec() }
    }

    pub fn bernoulli(p: f64) -> Self {
        SubsetSpec::Bernoulli { p, per_vertex: None }
    }

    pub fn uniform_k(k: usize) -> Self {
        SubsetSpec::UniformK { k }
    }

    pub fn tiled(l: usize) -> Self {
        SubsetSpec::Tiled { l, layout: TilingLayout::FullLattice }
    }

    pub fn union_of_copies(inner: SubsetSpec, k: usize) -> Self {
        SubsetSpec::UnionOfCopies { inner: Box::new(inner), k }
    }

    /// Explicit distribution from `(vertices, probability)` pairs.
    pub fn explicit(items: Vec<(Vec<usize>, f64)>) -> Self {
        SubsetSpec::Explicit {
            subsets: items.into_iter().map(|(vertices, prob)| WeightedSubset { vertices, prob }).collect(),
        }
    }

    pub fn validate(&self, graph: &Graph) -> Result<()> {
        let n = graph.n_vertices();
        let check_vertices = |vs: &[usize]| -> Result<()> {
            match vs.iter().find(|&&v| v >= n) {
                Some(v) => Err(Error::InvalidSubset(format!("vertex {v} out of range (n = {n})"))),
                None => Ok(()),
            }
        };
        let check_prob = |p: f64| -> Result<()> {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidSubset(format!("probability {p} outside [0, 1]")))
            }
        };
        match self {
            SubsetSpec::Fixed { vertices } => check_vertices(vertices),
            SubsetSpec::Bernoulli { p, per_vertex } => {
                check_prob(*p)?;
                if let Some(pv) = per_vertex {
                    if pv.len() != n {
                        return Err(Error::DimensionMismatch { expected: n, got: pv.len() });
                    }
                    pv.iter().try_for_each(|&q| check_prob(q))?;
                }
                Ok(())
            }
            SubsetSpec::UniformK { k } => {
                if *k > n {
                    Err(Error::InvalidSubset(format!("uniform_k with k = {k} > n = {n}")))
                } else {
                    Ok(())
                }
            }
            SubsetSpec::UniformTranslate { base } => {
                check_vertices(base)?;
                graph.translations().map(|_| ()).ok_or(Error::MissingTranslations)
            }
            SubsetSpec::Tiled { l, .. } => {
                let (_, side) = graph
                    .lattice()
                    .ok_or_else(|| Error::InvalidSubset("tiled subsets need a lattice graph".into()))?;
                if *l < 1 || l + 3 > side {
                    return Err(Error::InvalidSubset(format!("tiled needs 1 <= L and L + 3 <= side ({l}, {side})")));
                }
                Ok(())
            }
            SubsetSpec::UnionOfCopies { inner, k } => {
                if *k < 1 {
                    return Err(Error::InvalidSubset("union of k copies needs k >= 1".into()));
                }
                inner.validate(graph)
            }
            SubsetSpec::Explicit { subsets } => {
                let mut total = 0.0;
                for s in subsets {
                    check_vertices(&s.vertices)?;
                    check_prob(s.prob)?;
                    total += s.prob;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidSubset(format!("explicit probabilities sum to {total}")));
                }
                Ok(())
            }
        }
    }
}

/// Draw one subset from `spec`.
pub fn sample_subset(spec: &SubsetSpec, graph: &Graph, rng: &mut SpinRng) -> Result<SubsetMask> {
    spec.validate(graph)?;
    Ok(sample_unchecked(spec, graph, rng))
}

fn sample_unchecked(spec: &SubsetSpec, graph: &Graph, rng: &mut SpinRng) -> SubsetMask {
    let n = graph.n_vertices();
    match spec {
        SubsetSpec::Fixed { vertices } => SubsetMask::from_indices(n, vertices),
        SubsetSpec::Bernoulli { p, per_vertex } => {
            let mut m = SubsetMask::empty(n);
            for v in 0..n {
                let q = per_vertex.as_ref().map_or(*p, |pv| pv[v]);
                if rng.gen::<f64>() < q {
                    m.insert(v);
                }
            }
            m
        }
        SubsetSpec::UniformK { k } => {
            let mut idx: Vec<usize> = index::sample(rng, n, *k).into_vec();
            idx.sort_unstable();
            SubsetMask::from_indices(n, &idx)
        }
        SubsetSpec::UniformTranslate { base } => {
            let group = graph.translations().expect("validated");
            let g = rng.gen_range(0..group.order());
            translate(group, g, n, base)
        }
        SubsetSpec::Tiled { l, layout } => {
            let (dim, _) = graph.lattice().expect("validated");
            let period = l + 3;
            let shift: Vec<usize> = (0..dim).map(|_| rng.gen_range(0..period)).collect();
            tiled_mask(graph, *l, &shift, *layout)
        }
        SubsetSpec::UnionOfCopies { inner, k } => {
            let mut m = SubsetMask::empty(n);
            for _ in 0..*k {
                m.union_with(&sample_unchecked(inner, graph, rng));
            }
            m
        }
        SubsetSpec::Explicit { subsets } => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for s in subsets {
                acc += s.prob;
                if u < acc {
                    return SubsetMask::from_indices(n, &s.vertices);
                }
            }
            let last = subsets.iter().rev().find(|s| s.prob > 0.0).expect("validated distribution");
            SubsetMask::from_indices(n, &last.vertices)
        }
    }
}

fn translate(group: &TranslationGroup, g: usize, n: usize, base: &[usize]) -> SubsetMask {
    let image: Vec<usize> = base.iter().map(|&v| group.apply(g, v)).collect();
    SubsetMask::from_indices(n, &image)
}

/// The tiled subset for a fixed shift `w` (one coordinate per axis, each in `[0, l+3)`).
pub fn tiled_mask(graph: &Graph, l: usize, shift: &[usize], layout: TilingLayout) -> SubsetMask {
    let (dim, side) = graph.lattice().expect("tiled subsets need a lattice graph");
    assert_eq!(shift.len(), dim);
    let period = l + 3;
    let n = graph.n_vertices();
    let mut mask = SubsetMask::empty(n);
    let mut coords = vec![0usize; dim];
    for v in 0..n {
        let mut r = v;
        for i in (0..dim).rev() {
            coords[i] = r % side;
            r /= side;
        }
        let removed = match layout {
            TilingLayout::FullLattice => coords
                .iter()
                .zip(shift)
                .all(|(&x, &w)| (x + period - w % period) % period < l),
            TilingLayout::AxisOnly => {
                let rel: Vec<usize> = coords.iter().zip(shift).map(|(&x, &w)| (x + side - w % side) % side).collect();
                (0..dim).any(|i| {
                    rel[i] % period < l && (0..dim).filter(|&j| j != i).all(|j| rel[j] < l)
                })
            }
        };
        if !removed {
            mask.insert(v);
        }
    }
    mask
}

/// Per-vertex membership probabilities and their maximum δ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Revealment {
    pub per_vertex: Vec<f64>,
    pub delta: f64,
}

impl Revealment {
    fn from_vec(per_vertex: Vec<f64>) -> Self {
        let delta = per_vertex.iter().cloned().fold(0.0, f64::max);
        Self { per_vertex, delta }
    }

    pub fn min(&self) -> f64 {
        self.per_vertex.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

pub fn revealment(spec: &SubsetSpec, graph: &Graph) -> Result<Revealment> {
    spec.validate(graph)?;
    Ok(Revealment::from_vec(membership(spec, graph)))
}

fn membership(spec: &SubsetSpec, graph: &Graph) -> Vec<f64> {
    let n = graph.n_vertices();
    match spec {
        SubsetSpec::Fixed { vertices } => {
            let mut p = vec![0.0; n];
            for &v in vertices {
                p[v] = 1.0;
            }
            p
        }
        SubsetSpec::Bernoulli { p, per_vertex } => per_vertex.clone().unwrap_or_else(|| vec![*p; n]),
        SubsetSpec::UniformK { k } => vec![if n == 0 { 0.0 } else { *k as f64 / n as f64 }; n],
        SubsetSpec::UniformTranslate { base } => {
            let group = graph.translations().expect("validated");
            let order = group.order();
            let mut hits = vec![0usize; n];
            let base_mask = SubsetMask::from_indices(n, base);
            for g in 0..order {
                for v in base_mask.iter() {
                    hits[group.apply(g, v)] += 1;
                }
            }
            hits.into_iter().map(|h| h as f64 / order as f64).collect()
        }
        SubsetSpec::Tiled { l, layout: TilingLayout::FullLattice } => {
            // each coordinate residue is uniform over the period, independently per axis
            let (dim, _) = graph.lattice().expect("validated");
            let inside = (*l as f64 / (*l + 3) as f64).powi(dim as i32);
            vec![1.0 - inside; n]
        }
        SubsetSpec::Tiled { l, layout: TilingLayout::AxisOnly } => {
            let (dim, _) = graph.lattice().expect("validated");
            let period = l + 3;
            let shifts = period.pow(dim as u32);
            let mut hits = vec![0usize; n];
            let mut shift = vec![0usize; dim];
            for s in 0..shifts {
                let mut r = s;
                for w in shift.iter_mut() {
                    *w = r % period;
                    r /= period;
                }
                for v in tiled_mask(graph, *l, &shift, TilingLayout::AxisOnly).iter() {
                    hits[v] += 1;
                }
            }
            hits.into_iter().map(|h| h as f64 / shifts as f64).collect()
        }
        SubsetSpec::UnionOfCopies { inner, k } => membership(inner, graph)
            .into_iter()
            .map(|p| 1.0 - (1.0 - p).powi(*k as i32))
            .collect(),
        SubsetSpec::Explicit { subsets } => {
            let mut p = vec![0.0; n];
            for s in subsets {
                for v in SubsetMask::from_indices(n, &s.vertices).iter() {
                    p[v] += s.prob;
                }
            }
            p
        }
    }
}

/// Number of subsets the exact enumeration of `spec` would visit (an upper
/// bound on the support size), saturating.
pub fn support_size(spec: &SubsetSpec, graph: &Graph) -> u128 {
    let n = graph.n_vertices() as u32;
    match spec {
        SubsetSpec::Fixed { .. } => 1,
        SubsetSpec::Bernoulli { .. } => 1u128.checked_shl(n).unwrap_or(u128::MAX),
        SubsetSpec::UniformK { k } => binomial_u128(n as u128, *k as u128),
        SubsetSpec::UniformTranslate { .. } => graph.translations().map_or(0, |g| g.order() as u128),
        SubsetSpec::Tiled { l, .. } => {
            let dim = graph.lattice().map_or(1, |(d, _)| d);
            ((l + 3) as u128).saturating_pow(dim as u32)
        }
        SubsetSpec::UnionOfCopies { inner, k } => {
            let inner = support_size(inner, graph);
            let all = 1u128.checked_shl(n).unwrap_or(u128::MAX);
            inner.saturating_pow(*k as u32).min(all)
        }
        SubsetSpec::Explicit { subsets } => subsets.len() as u128,
    }
}

fn binomial_u128(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = match r.checked_mul(n - i) {
            Some(x) => x / (i + 1),
            None => return u128::MAX,
        };
    }
    r
}

/// Exact distribution of `spec` as `(bitmask, probability)` pairs sorted by
/// mask, for graphs with at most 64 vertices. Fails with
/// [`Error::SupportTooLarge`] when the enumeration would exceed `cap` subsets.
pub fn support_bits(spec: &SubsetSpec, graph: &Graph, cap: u128) -> Result<Vec<(u64, f64)>> {
    spec.validate(graph)?;
    let n = graph.n_vertices();
    if n > 64 {
        return Err(Error::CapExceeded { n, cap: 64 });
    }
    let size = support_size(spec, graph);
    if size > cap {
        return Err(Error::SupportTooLarge { size, cap });
    }
    let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
    enumerate_support(spec, graph, &mut |m, p| *acc.entry(m).or_insert(0.0) += p);
    Ok(acc.into_iter().filter(|&(_, p)| p > 0.0).collect())
}

fn enumerate_support(spec: &SubsetSpec, graph: &Graph, emit: &mut dyn FnMut(u64, f64)) {
    let n = graph.n_vertices();
    let bits_of = |vs: &[usize]| vs.iter().fold(0u64, |m, &v| m | (1u64 << v));
    match spec {
        SubsetSpec::Fixed { vertices } => emit(bits_of(vertices), 1.0),
        SubsetSpec::Bernoulli { p, per_vertex } => {
            let probs: Vec<f64> = per_vertex.clone().unwrap_or_else(|| vec![*p; n]);
            for m in 0..(1u64 << n) {
                let w = (0..n).fold(1.0, |w, v| if m >> v & 1 == 1 { w * probs[v] } else { w * (1.0 - probs[v]) });
                if w > 0.0 {
                    emit(m, w);
                }
            }
        }
        SubsetSpec::UniformK { k } => {
            let total = binomial_u128(n as u128, *k as u128) as f64;
            for m in KSubsets::new(n, *k) {
                emit(m, 1.0 / total);
            }
        }
        SubsetSpec::UniformTranslate { base } => {
            let group = graph.translations().expect("validated");
            let order = group.order();
            for g in 0..order {
                emit(translate(group, g, n, base).to_bits(), 1.0 / order as f64);
            }
        }
        SubsetSpec::Tiled { l, layout } => {
            let (dim, _) = graph.lattice().expect("validated");
            let period = l + 3;
            let shifts = period.pow(dim as u32);
            let mut shift = vec![0usize; dim];
            for s in 0..shifts {
                let mut r = s;
                for w in shift.iter_mut() {
                    *w = r % period;
                    r /= period;
                }
                emit(tiled_mask(graph, *l, &shift, *layout).to_bits(), 1.0 / shifts as f64);
            }
        }
        SubsetSpec::UnionOfCopies { inner, k } => {
            let mut base: BTreeMap<u64, f64> = BTreeMap::new();
            enumerate_support(inner, graph, &mut |m, p| *base.entry(m).or_insert(0.0) += p);
            let mut dist = base.clone();
            for _ in 1..*k {
                let mut next: BTreeMap<u64, f64> = BTreeMap::new();
                for (&a, &pa) in &dist {
                    for (&b, &pb) in &base {
                        *next.entry(a | b).or_insert(0.0) += pa * pb;
                    }
                }
                dist = next;
            }
            for (m, p) in dist {
                emit(m, p);
            }
        }
        SubsetSpec::Explicit { subsets } => {
            for s in subsets {
                emit(bits_of(&s.vertices), s.prob);
            }
        }
    }
}

/// All `k`-subsets of `[n]` as bitmasks, in increasing order (Gosper's hack).
pub struct KSubsets {
    next: Option<u64>,
    limit: u64,
}

impl KSubsets {
    pub fn new(n: usize, k: usize) -> Self {
        assert!(n <= 63, "KSubsets supports n <= 63");
        if k > n {
            return Self { next: None, limit: 0 };
        }
        let first = if k == 0 { 0 } else { (1u64 << k) - 1 };
        Self { next: Some(first), limit: 1u64 << n }
    }
}

impl Iterator for KSubsets {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            let nxt = (((r ^ cur) >> 2) / c) | r;
            (nxt < self.limit).then_some(nxt)
        };
        Some(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn cycle_counts() {
        let g = Graph::cycle(4).unwrap();
        assert_eq!(g.n_vertices(), 4);
        assert_eq!(g.n_edges(), 4);
        assert_eq!(g.translations().unwrap().order(), 4);
    }

    #[test]
    fn complete_counts() {
        assert_eq!(Graph::complete(3).unwrap().n_edges(), 3);
    }

    #[test]
    fn torus_counts_match_construction() {
        let g = Graph::torus(2, 3).unwrap();
        assert_eq!(g.n_vertices(), 9);
        // each vertex contributes one edge per axis
        assert_eq!(g.n_edges(), 2 * 9);
        assert!((0..9).all(|v| g.degree(v) == 4));
    }

    #[test]
    fn torus_rejects_small_side_and_overflow() {
        assert!(matches!(Graph::torus(2, 2), Err(Error::InvalidGraph(_))));
        assert!(matches!(Graph::torus(40, 4), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn translations_preserve_edges_and_act_transitively() {
        let g = Graph::torus(2, 4).unwrap();
        let group = g.translations().unwrap();
        let edges: std::collections::HashSet<_> = g.edges().iter().cloned().collect();
        let mut orbit = vec![false; 16];
        for t in 0..group.order() {
            orbit[group.apply(t, 0)] = true;
            for &(u, v) in g.edges() {
                assert!(edges.contains(&ordered(group.apply(t, u), group.apply(t, v))));
            }
        }
        assert!(orbit.iter().all(|&b| b));
    }

    #[test]
    fn custom_rejects_bad_edges() {
        assert!(Graph::custom(3, vec![(0, 0)]).is_err());
        assert!(Graph::custom(3, vec![(0, 1), (1, 0)]).is_err());
        let bad_translation = GraphSpec::Custom {
            n: 3,
            edges: vec![(0, 1)],
            translations: Some(vec![vec![1, 2, 0]]),
        };
        assert!(Graph::build(bad_translation).is_err());
    }

    #[test]
    fn graph_json_roundtrip() {
        let g = Graph::torus(2, 5).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(json, r#"{"kind":"torus","dim":2,"side":5}"#);
        let back: Graph = serde_json::from_str(&json).unwrap();
        assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn fixed_and_full_bernoulli() {
        let g = Graph::cycle(5).unwrap();
        let mut rng = stream(1, 0);
        let m = sample_subset(&SubsetSpec::fixed(&[0, 2]), &g, &mut rng).unwrap();
        assert_eq!(m.to_indices(), vec![0, 2]);
        let m = sample_subset(&SubsetSpec::bernoulli(1.0), &g, &mut rng).unwrap();
        assert_eq!(m.count(), 5);
        assert_eq!(serde_json::to_string(&SubsetMask::from_indices(5, &[3, 1])).unwrap(), "[1,3]");
    }

    #[test]
    fn uniform_k_rejects_k_above_n() {
        let g = Graph::cycle(4).unwrap();
        let mut rng = stream(1, 0);
        assert!(sample_subset(&SubsetSpec::uniform_k(5), &g, &mut rng).is_err());
    }

    #[test]
    fn revealment_closed_forms() {
        let g = Graph::cycle(8).unwrap();
        let r = revealment(&SubsetSpec::uniform_k(2), &g).unwrap();
        assert!(r.per_vertex.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert_eq!(revealment(&SubsetSpec::bernoulli(0.1), &g).unwrap().delta, 0.1);
        let g = Graph::torus(2, 40).unwrap();
        let r = revealment(&SubsetSpec::tiled(5), &g).unwrap();
        assert!((r.delta - 0.609375).abs() < 1e-15);
    }

    #[test]
    fn tiled_revealment_matches_shift_enumeration() {
        // closed form against the exact average over all (L+3)^d shifts
        for (side, l) in [(16, 5), (11, 4), (9, 2)] {
            let g = Graph::torus(2, side).unwrap();
            let r = revealment(&SubsetSpec::tiled(l), &g).unwrap();
            let period = l + 3;
            let mut hits = vec![0usize; g.n_vertices()];
            for a in 0..period {
                for b in 0..period {
                    for v in tiled_mask(&g, l, &[a, b], TilingLayout::FullLattice).iter() {
                        hits[v] += 1;
                    }
                }
            }
            for (v, h) in hits.iter().enumerate() {
                let exact = *h as f64 / (period * period) as f64;
                assert!((exact - r.per_vertex[v]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn union_of_copies_revealment() {
        let g = Graph::cycle(6).unwrap();
        let spec = SubsetSpec::union_of_copies(SubsetSpec::bernoulli(0.2), 3);
        let r = revealment(&spec, &g).unwrap();
        assert!((r.delta - (1.0 - 0.8f64.powi(3))).abs() < 1e-15);
        assert!(r.delta <= 3.0 * 0.2);
        let support = support_bits(&spec, &g, 1 << 20).unwrap();
        for v in 0..6 {
            let p: f64 = support.iter().filter(|(m, _)| m >> v & 1 == 1).map(|(_, p)| p).sum();
            assert!((p - r.per_vertex[v]).abs() < 1e-12);
        }
    }

    #[test]
    fn support_sums_to_one_and_matches_revealment() {
        let g = Graph::cycle(6).unwrap();
        let specs = [
            SubsetSpec::uniform_k(2),
            SubsetSpec::bernoulli(0.3),
            SubsetSpec::UniformTranslate { base: vec![0, 1, 3] },
            SubsetSpec::Tiled { l: 2, layout: TilingLayout::FullLattice },
            SubsetSpec::Tiled { l: 2, layout: TilingLayout::AxisOnly },
            SubsetSpec::union_of_copies(SubsetSpec::uniform_k(1), 2),
            SubsetSpec::explicit(vec![(vec![0], 0.5), (vec![1, 2], 0.5)]),
        ];
        for spec in &specs {
            let sup = support_bits(spec, &g, 1 << 20).unwrap();
            let total: f64 = sup.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12, "{spec:?}");
            let r = revealment(spec, &g).unwrap();
            for v in 0..6 {
                let p: f64 = sup.iter().filter(|(m, _)| m >> v & 1 == 1).map(|(_, p)| p).sum();
                assert!((p - r.per_vertex[v]).abs() < 1e-12, "{spec:?} vertex {v}");
            }
        }
    }

    #[test]
    fn ksubsets_enumerates_binomial() {
        assert_eq!(KSubsets::new(6, 2).count(), 15);
        assert_eq!(KSubsets::new(5, 0).collect::<Vec<_>>(), vec![0]);
        assert!(KSubsets::new(5, 3).all(|m| m.count_ones() == 3 && m < 32));
    }

    #[test]
    fn spec_json_schema() {
        let spec = SubsetSpec::union_of_copies(SubsetSpec::tiled(5), 2);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"union_of_copies","inner":{"kind":"tiled","l":5,"layout":"full_lattice"},"k":2}"#);
        let back: SubsetSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<SubsetSpec>(r#"{"kind":"uniform_k","k":2,"extra":1}"#).is_err());
    }
}
