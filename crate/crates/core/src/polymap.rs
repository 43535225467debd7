//! Polynomial maps `g: V -> A^s`, graph embeddings, joint counts, and the
//! linear-independence test for `{1, x_1..x_r, g_1..g_s}` on `V`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boxes::{count_in_box, CyclicBox};
use crate::error::{Error, Result};
use crate::ffgrid::{CellBudget, Prime};
use crate::sweep::{sweep_counts, CountField};
use crate::variety::{CompiledPoly, PointSet, Polynomial};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMap {
    ambient: usize,
    components: Vec<Polynomial>,
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    map: Vec<Polynomial>,
}

impl PolyMap {
    pub fn new(ambient: usize, components: Vec<Polynomial>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidMap(
                "a map needs at least one component".into(),
            ));
        }
        for (j, g) in components.iter().enumerate() {
            if g.terms.is_empty() {
                return Err(Error::InvalidMap(format!("component {j} has no terms")));
            }
            g.check_arity(ambient)
                .map_err(|e| Error::InvalidMap(format!("component {j}: {e}")))?;
        }
        Ok(PolyMap {
            ambient,
            components,
        })
    }

    /// Parses `{"map": [[{"coeff": .., "exps": [..]}, ..], ..]}` over `r` variables.
    pub fn from_json_str(s: &str, ambient: usize) -> Result<Self> {
        let file: MapFile = serde_json::from_str(s)?;
        Self::new(ambient, file.map)
    }

    pub fn from_path(path: impl AsRef<Path>, ambient: usize) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?, ambient)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MapFile {
            map: self.components.clone(),
        })
        .expect("map serializes")
    }

    /// Number of source variables `r`.
    pub fn ambient(&self) -> usize {
        self.ambient
    }

    /// Number of components `s`.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn compile(&self, p: Prime) -> CompiledMap {
        CompiledMap {
            polys: self.components.iter().map(|g| g.compile(p)).collect(),
        }
    }
}

pub struct CompiledMap {
    polys: Vec<CompiledPoly>,
}

impl CompiledMap {
    pub fn apply_into(&self, z: &[u64], out: &mut Vec<u64>) {
        out.clear();
        out.extend(self.polys.iter().map(|g| g.eval_unchecked(z)));
    }
}

pub fn apply_map(map: &PolyMap, point: &[u64], p: Prime) -> Result<Vec<u64>> {
    if point.len() != map.ambient {
        return Err(Error::DimensionMismatch {
            expected: map.ambient,
            found: point.len(),
        });
    }
    let mut out = Vec::with_capacity(map.len());
    map.compile(p).apply_into(point, &mut out);
    Ok(out)
}

fn check_source(points: &PointSet, map: &PolyMap) -> Result<()> {
    if points.dims() != map.ambient {
        return Err(Error::DimensionMismatch {
            expected: map.ambient,
            found: points.dims(),
        });
    }
    Ok(())
}

/// `{(z, g(z)) : z in V}` inside `F_p^(r+s)`.
pub fn graph_points(points: &PointSet, map: &PolyMap, budget: &CellBudget) -> Result<PointSet> {
    check_source(points, map)?;
    let dims = points.dims() + map.len();
    budget.check("graph grid", points.prime(), dims)?;
    let g = map.compile(points.prime());
    let mut coords = Vec::with_capacity(points.len() * dims);
    let mut image = Vec::new();
    for z in points.iter() {
        g.apply_into(z, &mut image);
        coords.extend_from_slice(z);
        coords.extend_from_slice(&image);
    }
    // rows stay sorted: distinct prefixes z in lexicographic order
    Ok(PointSet::from_sorted_flat(points.prime(), dims, coords))
}

/// `N_{B,B'}(V, g)`: points of `V` in `B` whose image lies in `B'`.
pub fn joint_count(
    points: &PointSet,
    map: &PolyMap,
    bx: &CyclicBox,
    bx2: &CyclicBox,
) -> Result<u64> {
    check_source(points, map)?;
    if bx.dims() != map.ambient || bx2.dims() != map.len() {
        return Err(Error::DimensionMismatch {
            expected: map.ambient + map.len(),
            found: bx.dims() + bx2.dims(),
        });
    }
    let g = map.compile(points.prime());
    let mut image = Vec::new();
    Ok(points
        .iter()
        .filter(|z| {
            bx.contains(z) && {
                g.apply_into(z, &mut image);
                bx2.contains(&image)
            }
        })
        .count() as u64)
}

/// Joint count through the graph: `N_{B x B'}` of the graph point set.
pub fn joint_count_via_graph(graph: &PointSet, bx: &CyclicBox, bx2: &CyclicBox) -> Result<u64> {
    Ok(count_in_box(graph, &bx.product(bx2)?))
}

/// Entry at `(x, y)` is `N_{B_x, B'_y}(V, g)`.
pub fn joint_sweep(
    graph: &PointSet,
    bx: &CyclicBox,
    bx2: &CyclicBox,
    budget: &CellBudget,
) -> Result<CountField> {
    let product = bx.product(bx2)?;
    if product.dims() != graph.dims() {
        return Err(Error::DimensionMismatch {
            expected: graph.dims(),
            found: product.dims(),
        });
    }
    let indicator = CountField::indicator(graph, budget)?;
    sweep_counts(&indicator, &product, budget)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndependenceReport {
    pub rank: usize,
    /// `1 + r + s`.
    pub columns: usize,
    pub independent: bool,
    /// Coefficients `(c_0, c_1..c_r, c'_1..c'_s)` of a combination vanishing on
    /// `V`, scaled so the first nonzero entry is 1.
    pub witness: Option<Vec<u64>>,
}

impl IndependenceReport {
    /// Witness as least absolute residues.
    pub fn witness_signed(&self, p: Prime) -> Option<Vec<i64>> {
        self.witness
            .as_ref()
            .map(|w| w.iter().map(|&c| p.least_abs_residue(c as i64)).collect())
    }
}

/// Evaluation row `(1, z_1..z_r, g_1(z)..g_s(z))`.
fn evaluation_row(z: &[u64], map: Option<&CompiledMap>, image: &mut Vec<u64>) -> Vec<u64> {
    let mut row = Vec::with_capacity(1 + z.len() + image.len());
    row.push(1);
    row.extend_from_slice(z);
    if let Some(g) = map {
        g.apply_into(z, image);
        row.extend_from_slice(image);
    }
    row
}

/// Rank over F_p of the `N(V) x (1+r+s)` evaluation matrix, with a kernel
/// vector when the rank is deficient.
pub fn independence_rank(points: &PointSet, map: Option<&PolyMap>) -> Result<IndependenceReport> {
    let p = points.prime();
    if points.is_empty() {
        return Err(Error::EmptyVariety(p.get()));
    }
    if let Some(g) = map {
        check_source(points, g)?;
    }
    let columns = 1 + points.dims() + map.map_or(0, PolyMap::len);
    let compiled = map.map(|g| g.compile(p));
    let mut image = Vec::new();

    // echelon basis of the row space: (pivot column, row with 1 at pivot)
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    for z in points.iter() {
        if basis.len() == columns {
            break;
        }
        let mut row = evaluation_row(z, compiled.as_ref(), &mut image);
        for (pc, b) in &basis {
            let f = row[*pc];
            if f != 0 {
                eliminate(p, &mut row, b, f);
            }
        }
        if let Some(pc) = row.iter().position(|&v| v != 0) {
            let inv = p.inv(row[pc]).expect("nonzero pivot");
            row.iter_mut().for_each(|v| *v = p.mul(*v, inv));
            // keep earlier rows reduced against the new pivot
            for (_, b) in basis.iter_mut() {
                let f = b[pc];
                if f != 0 {
                    eliminate(p, b, &row, f);
                }
            }
            basis.push((pc, row));
        }
    }

    let rank = basis.len();
    let witness = (rank < columns).then(|| {
        let pivots: Vec<usize> = basis.iter().map(|(pc, _)| *pc).collect();
        let free = (0..columns)
            .find(|c| !pivots.contains(c))
            .expect("deficient rank has a free column");
        let mut w = vec![0u64; columns];
        w[free] = 1;
        for (pc, b) in &basis {
            w[*pc] = (p.get() - b[free]) % p.get();
        }
        let lead = *w.iter().find(|&&c| c != 0).expect("witness is nonzero");
        let inv = p.inv(lead).expect("nonzero lead");
        w.iter_mut().for_each(|c| *c = p.mul(*c, inv));
        w
    });
    Ok(IndependenceReport {
        rank,
        columns,
        independent: rank == columns,
        witness,
    })
}

/// `row -= factor * pivot_row`, mod p.
fn eliminate(p: Prime, row: &mut [u64], pivot_row: &[u64], factor: u64) {
    let q = p.get();
    for (v, &b) in row.iter_mut().zip(pivot_row) {
        *v = (*v + q - p.mul(factor, b)) % q;
    }
}

/// Evaluates `c_0 + sum c_i z_i + sum c'_j g_j(z)` at every point.
pub fn witness_vanishes(points: &PointSet, map: Option<&PolyMap>, witness: &[u64]) -> bool {
    let p = points.prime();
    let compiled = map.map(|g| g.compile(p));
    let mut image = Vec::new();
    points.iter().all(|z| {
        let row = evaluation_row(z, compiled.as_ref(), &mut image);
        row.len() == witness.len()
            && row
                .iter()
                .zip(witness)
                .fold(0, |acc, (&a, &c)| p.add(acc, p.mul(a, c)))
                == 0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::CyclicInterval;
    use crate::variety::MonomialTerm;

    fn p(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    fn mono(c: i64, e: &[u32]) -> MonomialTerm {
        MonomialTerm::new(c, e.to_vec())
    }

    fn elliptic(q: Prime) -> PointSet {
        let mut pts = Vec::new();
        for x in 0..q.get() {
            for y in 0..q.get() {
                if (y * y + q.get() * q.get() - x * x * x % q.get() - x).is_multiple_of(q.get()) {
                    pts.push(vec![x, y]);
                }
            }
        }
        PointSet::from_points(q, 2, pts).unwrap()
    }

    fn diagonal_map() -> PolyMap {
        PolyMap::new(
            2,
            vec![
                Polynomial::new(vec![mono(1, &[3, 0]), mono(1, &[1, 0])]),
                Polynomial::new(vec![mono(1, &[0, 2])]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn apply_examples() {
        let q = p(5);
        let first = PolyMap::new(2, vec![Polynomial::new(vec![mono(1, &[1, 0])])]).unwrap();
        assert_eq!(apply_map(&first, &[3, 4], q).unwrap(), [3]);
        assert_eq!(apply_map(&diagonal_map(), &[2, 0], q).unwrap(), [0, 0]);
        let constant = PolyMap::new(2, vec![Polynomial::new(vec![mono(7, &[0, 0])])]).unwrap();
        for z in [[0, 0], [1, 4], [3, 2]] {
            assert_eq!(apply_map(&constant, &z, q).unwrap(), [2]);
        }
        assert!(apply_map(&first, &[1, 2, 3], q).is_err());
        assert!(PolyMap::new(2, vec![]).is_err());
    }

    #[test]
    fn graph_examples() {
        let q = p(5);
        let pts = elliptic(q);
        let g = graph_points(&pts, &diagonal_map(), &CellBudget::default()).unwrap();
        assert_eq!(g.dims(), 4);
        assert_eq!(g.len(), pts.len());
        assert_eq!(g.len(), 3);
        for y in g.iter() {
            assert_eq!(y[2], y[3]);
        }
        assert!(graph_points(&pts, &diagonal_map(), &CellBudget::new(100)).is_err());
    }

    #[test]
    fn diagonal_joint_counts() {
        for q in [5u64, 13, 29] {
            let qp = p(q);
            let pts = elliptic(qp);
            let h = (q - 1) / 2;
            let full = CyclicBox::full(qp, 2);
            let off_diag = CyclicBox::new(vec![
                CyclicInterval::closed(0, h - 1, qp).unwrap(),
                CyclicInterval::closed(h + 1, q - 1, qp).unwrap(),
            ])
            .unwrap();
            assert_eq!(
                joint_count(&pts, &diagonal_map(), &full, &off_diag).unwrap(),
                0
            );

            let hx = PolyMap::new(2, vec![Polynomial::new(vec![mono(1, &[1, 0])])]).unwrap();
            let left = CyclicBox::new(vec![
                CyclicInterval::closed(0, h, qp).unwrap(),
                CyclicInterval::full(qp),
            ])
            .unwrap();
            let right =
                CyclicBox::new(vec![CyclicInterval::closed(h + 1, q - 1, qp).unwrap()]).unwrap();
            assert_eq!(joint_count(&pts, &hx, &left, &right).unwrap(), 0);
            let full1 = CyclicBox::full(qp, 1);
            assert_eq!(
                joint_count(&pts, &hx, &full, &full1).unwrap(),
                pts.len() as u64
            );
        }
    }

    #[test]
    fn joint_paths_agree() {
        let q = p(7);
        let pts = elliptic(q);
        let map = PolyMap::new(2, vec![Polynomial::new(vec![mono(1, &[1, 1])])]).unwrap();
        let graph = graph_points(&pts, &map, &CellBudget::default()).unwrap();
        for (s, l, s2, l2) in [(0, 3, 0, 2), (5, 4, 6, 7), (2, 7, 3, 1)] {
            let bx = CyclicBox::new(vec![
                CyclicInterval::new(s, l, q).unwrap(),
                CyclicInterval::new(s + 1, l, q).unwrap(),
            ])
            .unwrap();
            let b2 = CyclicBox::new(vec![CyclicInterval::new(s2, l2, q).unwrap()]).unwrap();
            assert_eq!(
                joint_count(&pts, &map, &bx, &b2).unwrap(),
                joint_count_via_graph(&graph, &bx, &b2).unwrap()
            );
            let field = joint_sweep(&graph, &bx, &b2, &CellBudget::default()).unwrap();
            assert_eq!(
                field.total(),
                pts.len() as u128 * bx.volume() as u128 * b2.volume() as u128
            );
            for x0 in 0..7 {
                for y in 0..7 {
                    let tx = bx.translate(&[x0, 3]).unwrap();
                    let ty = b2.translate(&[y]).unwrap();
                    assert_eq!(
                        field.at(&[x0, 3, y]).unwrap(),
                        joint_count(&pts, &map, &tx, &ty).unwrap()
                    );
                }
            }
        }
        let unit = joint_sweep(
            &graph,
            &CyclicBox::from_lengths(&[1, 1], q).unwrap(),
            &CyclicBox::from_lengths(&[1], q).unwrap(),
            &CellBudget::default(),
        )
        .unwrap();
        assert_eq!(
            unit,
            CountField::indicator(&graph, &CellBudget::default()).unwrap()
        );
    }

    #[test]
    fn rank_examples() {
        let q = p(7);
        let diag = PointSet::from_points(q, 2, (0..7).map(|x| vec![x, x])).unwrap();
        let rep = independence_rank(&diag, None).unwrap();
        assert_eq!(rep.rank, 2);
        assert!(!rep.independent);
        assert_eq!(rep.witness_signed(q).unwrap(), [0, 1, -1]);
        assert!(witness_vanishes(&diag, None, rep.witness.as_ref().unwrap()));

        let pts = elliptic(q);
        let rep = independence_rank(&pts, Some(&diagonal_map())).unwrap();
        assert!(!rep.independent);
        let w = rep.witness_signed(q).unwrap();
        assert_eq!(&w[3..], [1, -1]);
        assert!(witness_vanishes(
            &pts,
            Some(&diagonal_map()),
            rep.witness.as_ref().unwrap()
        ));

        let xy = PolyMap::new(2, vec![Polynomial::new(vec![mono(1, &[1, 1])])]).unwrap();
        for q in [7u64, 11, 13] {
            let rep = independence_rank(&elliptic(p(q)), Some(&xy)).unwrap();
            assert_eq!(rep.rank, 4);
            assert!(rep.independent && rep.witness.is_none());
        }
        assert!(matches!(
            independence_rank(&PointSet::empty(q, 2), None),
            Err(Error::EmptyVariety(7))
        ));
    }

    #[test]
    fn rank_invariant_under_relabeling() {
        let q = p(11);
        let pts = elliptic(q);
        let base = diagonal_map();
        let mixed = PolyMap::new(
            2,
            vec![
                // (g1 + 2 g2, g2)
                Polynomial::new(vec![mono(1, &[3, 0]), mono(1, &[1, 0]), mono(2, &[0, 2])]),
                Polynomial::new(vec![mono(1, &[0, 2])]),
            ],
        )
        .unwrap();
        let a = independence_rank(&pts, Some(&base)).unwrap();
        let b = independence_rank(&pts, Some(&mixed)).unwrap();
        assert_eq!(a.rank, b.rank);
        assert!(witness_vanishes(
            &pts,
            Some(&mixed),
            b.witness.as_ref().unwrap()
        ));
        let mut rev = pts.to_vecs();
        rev.reverse();
        // from_points re-sorts, so feed rows in reverse through a manual reversed build
        let reversed = PointSet::from_sorted_flat(q, 2, rev.concat());
        assert_eq!(
            independence_rank(&reversed, Some(&base)).unwrap().rank,
            a.rank
        );
    }

    #[test]
    fn map_json() {
        let text = r#"{"map": [[{"coeff": 1, "exps": [1, 1]}], [{"coeff": 1, "exps": [0, 2]}]]}"#;
        let m = PolyMap::from_json_str(text, 2).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(PolyMap::from_json_str(&m.to_json(), 2).unwrap(), m);
        assert!(PolyMap::from_json_str(text, 3).is_err());
    }
}
