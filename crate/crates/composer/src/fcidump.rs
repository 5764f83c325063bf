//! FCIDUMP reading and writing.
//!
//! Header is a Fortran namelist (`&FCI NORB=.., NELEC=.., ORBSYM=.., &END`
//! or `/`); body lines are `value i j k l` with 1-based spatial indices in
//! chemists' order. Symmetry labels are read and dropped.

use std::fmt::Write as _;

use composer_core::integrals::IntegralSet;
use composer_core::{Error, RMat, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

struct Header {
    norb: usize,
    nelec: usize,
    body_start: usize,
}

fn parse_header(lines: &[&str]) -> Result<Header> {
    let first = lines.iter().position(|l| !l.trim().is_empty()).ok_or_else(|| parse_err(1, "empty input"))?;
    if !lines[first].trim_start().to_ascii_uppercase().starts_with("&FCI") {
        return Err(parse_err(first + 1, "expected &FCI namelist"));
    }
    let mut keys: Vec<(usize, String, String)> = Vec::new();
    let mut end = None;
    for (i, raw) in lines.iter().enumerate().skip(first) {
        let mut text = raw.trim().to_string();
        let upper = text.to_ascii_uppercase();
        if i == first {
            text = text[4..].to_string();
        }
        let closes = upper.ends_with("&END") || upper.ends_with('/') || upper == "&END";
        if closes {
            let cut = if upper.ends_with("&END") { text.len() - 4 } else { text.len() - 1 };
            text.truncate(cut.min(text.len()));
        }
        for tok in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            match tok.split_once('=') {
                Some((k, v)) => keys.push((i + 1, k.trim().to_ascii_uppercase(), v.trim().to_string())),
                None => match keys.last_mut() {
                    // continuation of a list value such as ORBSYM
                    Some(last) => {
                        // `NORB=   7` leaves the value in the next token
                        if !last.2.is_empty() && !last.2.ends_with(',') {
                            last.2.push(',');
                        }
                        last.2.push_str(tok);
                    }
                    None => return Err(parse_err(i + 1, format!("unexpected token {tok:?} in namelist"))),
                },
            }
        }
        if closes {
            end = Some(i + 1);
            break;
        }
    }
    let body_start = end.ok_or_else(|| parse_err(lines.len(), "namelist is not terminated by &END or /"))?;
    let get = |name: &str| -> Result<usize> {
        let (line, _, v) = keys
            .iter()
            .find(|(_, k, _)| k == name)
            .ok_or_else(|| parse_err(body_start, format!("namelist lacks {name}")))?;
        v.trim_end_matches(',').parse().map_err(|_| parse_err(*line, format!("{name}={v:?} is not a count")))
    };
    Ok(Header { norb: get("NORB")?, nelec: get("NELEC")?, body_start })
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    tok.replace(['D', 'd'], "E").parse().map_err(|_| parse_err(line, format!("bad value {tok:?}")))
}

/// Reads FCIDUMP text into spin-orbital integrals.
pub fn parse_fcidump(text: &str) -> Result<IntegralSet> {
    let lines: Vec<&str> = text.lines().collect();
    let Header { norb: m, nelec, body_start } = parse_header(&lines)?;
    if nelec > 2 * m {
        return Err(Error::Validation(format!("NELEC={nelec} exceeds 2*NORB={}", 2 * m)));
    }
    let mut h = RMat::zeros(m, m);
    let mut chem = vec![0.0; m.pow(4)];
    let mut eps = vec![None; m];
    let mut e_nn = 0.0;
    let at = |i: usize, j: usize, k: usize, l: usize| ((i * m + j) * m + k) * m + l;
    for (off, raw) in lines[body_start..].iter().enumerate() {
        let line = body_start + off + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 5 {
            return Err(parse_err(line, format!("expected 5 fields, found {}", toks.len())));
        }
        let v = parse_value(toks[0], line)?;
        let mut idx = [0usize; 4];
        for (slot, tok) in idx.iter_mut().zip(&toks[1..]) {
            *slot = tok.parse().map_err(|_| parse_err(line, format!("bad index {tok:?}")))?;
            if *slot > m {
                return Err(parse_err(line, format!("index {slot} exceeds NORB={m}")));
            }
        }
        match idx {
            [0, 0, 0, 0] => e_nn = v,
            [i, 0, 0, 0] => eps[i - 1] = Some(v),
            [i, j, 0, 0] if j > 0 => {
                h[(i - 1, j - 1)] = v;
                h[(j - 1, i - 1)] = v;
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                let (i, j, k, l) = (i - 1, j - 1, k - 1, l - 1);
                for (a, b, c, d) in [(i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k)] {
                    chem[at(a, b, c, d)] = v;
                    chem[at(c, d, a, b)] = v;
                }
            }
            _ => return Err(parse_err(line, format!("index pattern {idx:?} is not an FCIDUMP record"))),
        }
    }
    let energies: Option<Vec<f64>> = eps.iter().copied().collect();
    IntegralSet::from_spatial(m, nelec, e_nn, &h, &chem, energies.as_deref())
}

/// Writes the unique 8-fold images, one-body entries, orbital energies and
/// the constant. Values use Rust's shortest round-trip formatting.
pub fn write_fcidump(ints: &IntegralSet) -> String {
    let m = ints.n_spatial;
    let mut out = String::new();
    let orbsym = vec!["1"; m].join(",");
    let _ = writeln!(out, "&FCI NORB={m},NELEC={},MS2=0,", ints.n_elec);
    let _ = writeln!(out, "  ORBSYM={orbsym},");
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, "&END");
    for i in 0..m {
        for j in 0..=i {
            for k in 0..m {
                for l in 0..=k {
                    if i * (i + 1) / 2 + j < k * (k + 1) / 2 + l {
                        continue;
                    }
                    let v = ints.spatial_chem(i, j, k, l);
                    if v != 0.0 {
                        let _ = writeln!(out, "{v:e} {} {} {} {}", i + 1, j + 1, k + 1, l + 1);
                    }
                }
            }
        }
    }
    let h = ints.spatial_h();
    for i in 0..m {
        for j in 0..=i {
            if h[(i, j)] != 0.0 {
                let _ = writeln!(out, "{:e} {} {} 0 0", h[(i, j)], i + 1, j + 1);
            }
        }
    }
    if let Some(e) = &ints.orb_energies {
        for i in 0..m {
            let _ = writeln!(out, "{:e} {} 0 0 0", e[2 * i], i + 1);
        }
    }
    let _ = writeln!(out, "{:e} 0 0 0 0", ints.e_nn);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use composer_core::fermion::basis_state;
    use composer_core::integrals::synth_instance;
    use composer_core::linalg::eigh;

    const H2_LIKE: &str = "&FCI NORB=1,NELEC=2,\n&END\n0.7137 1 1 1 1\n-1.2528 1 1 0 0\n0.7137 0 0 0 0\n";

    fn assert_close(a: &IntegralSet, b: &IntegralSet) {
        assert_eq!((a.n_so, a.n_elec), (b.n_so, b.n_elec));
        assert!((a.e_nn - b.e_nn).abs() <= 1e-14);
        assert!((&a.h - &b.h).amax() <= 1e-14);
        assert!(a.eri.iter().zip(&b.eri).all(|(x, y)| (x - y).abs() <= 1e-14));
    }

    #[test]
    fn minimal_instance() {
        let ints = parse_fcidump(H2_LIKE).unwrap();
        assert_eq!(ints.n_so, 2);
        assert_eq!(ints.h[(0, 0)], -1.2528);
        assert_eq!(ints.h[(1, 1)], -1.2528);
        assert_eq!(ints.eri(0, 1, 0, 1), 0.7137);
        assert_eq!(ints.e_nn, 0.7137);
        ints.validate().unwrap();
    }

    #[test]
    fn minimal_instance_energy() {
        // only one determinant has two electrons in two spin orbitals
        let ints = parse_fcidump(H2_LIKE).unwrap();
        let op = ints.hamiltonian(true).unwrap();
        let phi = basis_state(2, 0b11);
        let e = (phi.adjoint() * &op.matrix * &phi)[(0, 0)].re;
        let expected = 2.0 * -1.2528 + 0.7137 + 0.7137;
        assert!((e - expected).abs() < 1e-12, "{e}");
        let (vals, _) = eigh(&op.matrix);
        assert!(vals.iter().any(|v| (v - expected).abs() < 1e-12));
    }

    #[test]
    fn reserialized_minimal_instance_matches() {
        let ints = parse_fcidump(H2_LIKE).unwrap();
        let again = parse_fcidump(&write_fcidump(&ints)).unwrap();
        assert_close(&ints, &again);
    }

    #[test]
    fn empty_body_is_zero() {
        let ints = parse_fcidump("&FCI NORB=2,NELEC=2 &END\n").unwrap();
        assert_eq!(ints.e_nn, 0.0);
        assert_eq!(ints.h.amax(), 0.0);
        assert!(ints.eri.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn slash_terminator_and_fortran_exponents() {
        let ints = parse_fcidump(" &FCI NORB=1,\n NELEC=2,\n ORBSYM=1,\n ISYM=1\n /\n 1.5D-01 1 1 1 1\n").unwrap();
        assert_eq!(ints.eri(0, 1, 0, 1), 0.15);
    }

    #[test]
    fn padded_namelist_values() {
        let ints = parse_fcidump(" &FCI NORB=   2,NELEC= 2,MS2=0,\n  ORBSYM=1,1,\n &END\n 0.5 1 1 0 0\n").unwrap();
        assert_eq!((ints.n_spatial, ints.n_elec), (2, 2));
        assert_eq!(ints.h[(0, 0)], 0.5);
    }

    #[test]
    fn out_of_range_index() {
        let err = parse_fcidump("&FCI NORB=2,NELEC=2\n&END\n0.5 3 1 0 0\n").unwrap_err();
        assert_eq!(err, Error::Parse { line: 3, msg: "index 3 exceeds NORB=2".into() });
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(parse_fcidump("&FCI NORB=x,NELEC=2\n&END\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_fcidump("&FCI NORB=2\n&END\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_fcidump("&FCI NORB=2,NELEC=2\n0.1 1 1 0 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_fcidump("NORB=2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_fcidump("&FCI NORB=1,NELEC=4\n&END\n"), Err(Error::Validation(_))));
        assert!(matches!(parse_fcidump("&FCI NORB=2,NELEC=2\n&END\n0.1 1 0 1 0\n"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn synthetic_round_trip() {
        for seed in 0..5 {
            let ints = synth_instance(seed, 3, 2).unwrap();
            let text = write_fcidump(&ints);
            let back = parse_fcidump(&text).unwrap();
            assert_close(&ints, &back);
            assert_eq!(write_fcidump(&back), text);
        }
    }

    #[test]
    fn spin_expansion_keeps_trace() {
        let ints = synth_instance(3, 3, 2).unwrap();
        let back = parse_fcidump(&write_fcidump(&ints)).unwrap();
        assert!((back.h.trace() - 2.0 * back.spatial_h().trace()).abs() < 1e-14);
    }
}
