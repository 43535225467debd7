//! Built-in varieties, instantiated per prime with declared `n`, `d`, `delta`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ffgrid::Prime;
use crate::variety::{MonomialTerm, Polynomial, VarietySpec};

pub type CatalogParams = BTreeMap<String, String>;

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub equation: &'static str,
    pub params: &'static str,
    /// Metadata for the default parameters.
    pub n: usize,
    pub d: u32,
    pub delta: i32,
    pub min_prime: u64,
    pub note: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "hyperbola",
        equation: "x1*x2*...*xr = c",
        params: "r (default 2), c (default 1, nonzero mod p)",
        n: 1,
        d: 2,
        delta: -1,
        min_prime: 2,
        note: "modular hyperbola; n = r-1, d = r, delta = n-2 for r >= 3",
    },
    CatalogEntry {
        name: "elliptic_x3px",
        equation: "y^2 = x^3 + x",
        params: "none",
        n: 1,
        d: 3,
        delta: -1,
        min_prime: 3,
        note: "nonsingular for odd p; affine count is p when p = 3 mod 4",
    },
    CatalogEntry {
        name: "hyperelliptic_l",
        equation: "y^l = f(x)",
        params: "l (default 2), f = coefficients low to high (default 1,0,0,0,0,1 = x^5+1)",
        n: 1,
        d: 5,
        delta: -1,
        min_prime: 3,
        note: "requires f squarefree mod p and p not dividing l; d = max(l, deg f)",
    },
    CatalogEntry {
        name: "parabola_graph",
        equation: "x2 = x1^2",
        params: "none",
        n: 1,
        d: 2,
        delta: -1,
        min_prime: 2,
        note: "graph of a polynomial, exactly p points",
    },
    CatalogEntry {
        name: "fermat_cubic",
        equation: "x^3 + y^3 + z^3 = 1",
        params: "none",
        n: 2,
        d: 3,
        delta: 0,
        min_prime: 5,
        note: "smooth cubic surface in A^3; tangent sections at infinity give delta = 0",
    },
];

pub fn lookup(name: &str) -> Result<&'static CatalogEntry> {
    CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownCatalog(name.to_string()))
}

fn param<T: std::str::FromStr>(params: &CatalogParams, key: &str, default: T) -> Result<T> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParam(format!("{key}=`{v}` is not a valid value"))),
    }
}

fn check_known(params: &CatalogParams, name: &str, known: &[&str]) -> Result<()> {
    match params.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidParam(format!(
            "`{name}` takes no parameter `{k}`"
        ))),
        None => Ok(()),
    }
}

fn term(coeff: i64, exps: &[u32]) -> MonomialTerm {
    MonomialTerm::new(coeff, exps.to_vec())
}

pub fn catalog_instantiate(name: &str, p: Prime, params: &CatalogParams) -> Result<VarietySpec> {
    let entry = lookup(name)?;
    if p.get() < entry.min_prime {
        return Err(Error::InvalidParam(format!(
            "`{name}` needs p >= {}, got {p}",
            entry.min_prime
        )));
    }
    let spec = match name {
        "hyperbola" => {
            check_known(params, name, &["r", "c"])?;
            let r: usize = param(params, "r", 2)?;
            let c: i64 = param(params, "c", 1)?;
            if r < 2 {
                return Err(Error::InvalidParam(format!(
                    "hyperbola needs r >= 2, got {r}"
                )));
            }
            if p.reduce(c) == 0 {
                return Err(Error::InvalidParam(format!(
                    "hyperbola needs c != 0 mod {p}"
                )));
            }
            VarietySpec {
                name: if r == 2 && c == 1 {
                    "hyperbola".into()
                } else {
                    format!("hyperbola(r={r},c={c})")
                },
                r,
                n: r - 1,
                d: r as u32,
                delta: Some(r as i32 - 3),
                polys: vec![Polynomial::new(vec![
                    term(1, &vec![1; r]),
                    term(-c, &vec![0; r]),
                ])],
            }
        }
        "elliptic_x3px" => {
            check_known(params, name, &[])?;
            VarietySpec {
                name: name.into(),
                r: 2,
                n: 1,
                d: 3,
                delta: Some(-1),
                polys: vec![Polynomial::new(vec![
                    term(1, &[0, 2]),
                    term(-1, &[3, 0]),
                    term(-1, &[1, 0]),
                ])],
            }
        }
        "hyperelliptic_l" => {
            check_known(params, name, &["l", "f"])?;
            let l: u32 = param(params, "l", 2)?;
            let f: Vec<i64> = match params.get("f") {
                None => vec![1, 0, 0, 0, 0, 1],
                Some(s) => s
                    .split(',')
                    .map(|c| c.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| {
                        Error::InvalidParam(format!("f=`{s}` must be comma-separated integers"))
                    })?,
            };
            hyperelliptic(l, &f, p)?
        }
        "parabola_graph" => {
            check_known(params, name, &[])?;
            VarietySpec {
                name: name.into(),
                r: 2,
                n: 1,
                d: 2,
                delta: Some(-1),
                polys: vec![Polynomial::new(vec![term(1, &[0, 1]), term(-1, &[2, 0])])],
            }
        }
        "fermat_cubic" => {
            check_known(params, name, &[])?;
            VarietySpec {
                name: name.into(),
                r: 3,
                n: 2,
                d: 3,
                delta: Some(0),
                polys: vec![Polynomial::new(vec![
                    term(1, &[3, 0, 0]),
                    term(1, &[0, 3, 0]),
                    term(1, &[0, 0, 3]),
                    term(-1, &[0, 0, 0]),
                ])],
            }
        }
        _ => unreachable!("lookup accepted `{name}`"),
    };
    spec.validate()?;
    Ok(spec)
}

fn hyperelliptic(l: u32, f: &[i64], p: Prime) -> Result<VarietySpec> {
    if l < 2 {
        return Err(Error::InvalidParam(format!(
            "l must be at least 2, got {l}"
        )));
    }
    if p.get().is_multiple_of(l as u64) {
        return Err(Error::InvalidParam(format!("p={p} divides l={l}")));
    }
    let reduced: Vec<u64> = f.iter().map(|&c| p.reduce(c)).collect();
    let deg = match reduced.iter().rposition(|&c| c != 0) {
        Some(d) if d >= 1 => d,
        _ => return Err(Error::InvalidParam("f must have degree >= 1 mod p".into())),
    };
    if deg + 1 != f.len() || f.last() == Some(&0) {
        return Err(Error::InvalidParam(format!(
            "leading coefficient of f vanishes mod {p}"
        )));
    }
    if !is_squarefree(&reduced, p) {
        return Err(Error::InvalidParam(format!("f is not squarefree mod {p}")));
    }
    let mut terms = vec![term(1, &[0, l])];
    for (k, &c) in f.iter().enumerate() {
        if c != 0 {
            terms.push(term(-c, &[k as u32, 0]));
        }
    }
    let name = if l == 2 && f == [1, 0, 0, 0, 0, 1] {
        "hyperelliptic_l".to_string()
    } else {
        let coeffs: Vec<String> = f.iter().map(i64::to_string).collect();
        format!("hyperelliptic_l(l={l},f={})", coeffs.join(","))
    };
    Ok(VarietySpec {
        name,
        r: 2,
        n: 1,
        d: l.max(deg as u32),
        delta: Some(-1),
        polys: vec![Polynomial::new(terms)],
    })
}

/// Univariate `gcd(f, f') = 1` over F_p, coefficients low to high.
fn is_squarefree(f: &[u64], p: Prime) -> bool {
    let deriv: Vec<u64> = f
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| p.mul(c, k as u64 % p.get()))
        .collect();
    poly_gcd_degree(f.to_vec(), deriv, p) == 0
}

fn trim(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn poly_gcd_degree(mut a: Vec<u64>, mut b: Vec<u64>, p: Prime) -> usize {
    trim(&mut a);
    trim(&mut b);
    while !b.is_empty() {
        // a mod b
        let lead_inv = p.inv(*b.last().unwrap()).unwrap();
        while a.len() >= b.len() && !a.is_empty() {
            let shift = a.len() - b.len();
            let f = p.mul(*a.last().unwrap(), lead_inv);
            for (k, &c) in b.iter().enumerate() {
                a[shift + k] = (a[shift + k] + p.get() - p.mul(f, c)) % p.get();
            }
            trim(&mut a);
        }
        std::mem::swap(&mut a, &mut b);
    }
    a.len().saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffgrid::CellBudget;
    use crate::variety::point_count;

    fn p(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    fn params(kv: &[(&str, &str)]) -> CatalogParams {
        kv.iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn instantiate_examples() {
        let b = CellBudget::default();
        let hyp = catalog_instantiate("hyperbola", p(5), &params(&[("c", "1")])).unwrap();
        assert_eq!((hyp.n, hyp.d, hyp.delta()), (1, 2, -1));
        assert_eq!(point_count(&hyp, p(5), &b).unwrap(), 4);
        let ell = catalog_instantiate("elliptic_x3px", p(5), &CatalogParams::new()).unwrap();
        assert_eq!(point_count(&ell, p(5), &b).unwrap(), 3);
        let he = catalog_instantiate(
            "hyperelliptic_l",
            p(101),
            &params(&[("l", "2"), ("f", "1,0,0,0,0,1")]),
        )
        .unwrap();
        assert_eq!((he.n, he.d, he.delta()), (1, 5, -1));
        assert_eq!(he.polys[0].total_degree(), 5);
    }

    #[test]
    fn instantiate_errors() {
        assert!(matches!(
            catalog_instantiate("nope", p(5), &CatalogParams::new()),
            Err(Error::UnknownCatalog(_))
        ));
        assert!(catalog_instantiate("hyperbola", p(5), &params(&[("c", "10")])).is_err());
        assert!(catalog_instantiate("hyperbola", p(5), &params(&[("r", "1")])).is_err());
        assert!(catalog_instantiate("hyperbola", p(5), &params(&[("q", "1")])).is_err());
        assert!(catalog_instantiate("elliptic_x3px", p(2), &CatalogParams::new()).is_err());
        assert!(catalog_instantiate("fermat_cubic", p(3), &CatalogParams::new()).is_err());
        // x^5 + 1 = (x + 1)^5 mod 5
        assert!(catalog_instantiate("hyperelliptic_l", p(5), &CatalogParams::new()).is_err());
        assert!(catalog_instantiate("hyperelliptic_l", p(7), &params(&[("f", "1,2,1")])).is_err());
        assert!(catalog_instantiate("hyperelliptic_l", p(7), &params(&[("l", "7")])).is_err());
        assert!(catalog_instantiate("hyperelliptic_l", p(7), &params(&[("f", "a,b")])).is_err());
    }

    #[test]
    fn higher_hyperbola() {
        let b = CellBudget::default();
        let s = catalog_instantiate("hyperbola", p(7), &params(&[("r", "3"), ("c", "2")])).unwrap();
        assert_eq!((s.r, s.n, s.d, s.delta()), (3, 2, 3, 0));
        assert_eq!(point_count(&s, p(7), &b).unwrap(), 36);
    }

    #[test]
    fn squarefree_check() {
        let q = p(7);
        assert!(is_squarefree(&[1, 0, 1], q)); // x^2 + 1
        assert!(!is_squarefree(&[1, 2, 1], q)); // (x + 1)^2
        assert!(is_squarefree(&[0, 1, 0, 1], q)); // x^3 + x
        assert!(!is_squarefree(&[1, 0, 0, 0, 0, 1], p(5)));
    }

    #[test]
    fn every_entry_instantiates() {
        for e in CATALOG {
            let s = catalog_instantiate(e.name, p(11), &CatalogParams::new()).unwrap();
            assert_eq!((s.n, s.d, s.delta()), (e.n, e.d, e.delta), "{}", e.name);
        }
    }

    #[test]
    fn graph_has_p_points() {
        let b = CellBudget::default();
        let s = catalog_instantiate("parabola_graph", p(11), &CatalogParams::new()).unwrap();
        assert_eq!(point_count(&s, p(11), &b).unwrap(), 11);
    }
}
