//! Plain-text integral files.
//!
//! ```text
//! NORB=4 NELEC=2
//! # comment
//! 1 1 0 0 -1.25          one-body h_11
//! 1 2 1 2 0.5            two-body (12|12)
//! 0 0 0 0 0.7            core energy
//! ```
//!
//! Indices are 1-based. Unlisted entries are zero and symmetry images may be
//! omitted.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{canonical_index, MolecularIntegrals};

#[derive(Clone, Debug)]
pub struct IntegralFile {
    pub integrals: MolecularIntegrals,
    pub n_electrons: usize,
    /// Records that repeated an earlier index tuple exactly (last one wins).
    pub duplicates: usize,
}

/// Canonical text form; values use 17 significant digits.
pub fn integrals_to_string(ints: &MolecularIntegrals, n_electrons: usize) -> String {
    let n = ints.n_modes();
    let mut out = String::new();
    writeln!(out, "NORB={n} NELEC={n_electrons}").unwrap();
    for p in 0..n {
        for q in 0..=p {
            for r in 0..n {
                for s in 0..=r {
                    if (p, q) < (r, s) {
                        continue;
                    }
                    let v = ints.g(p, q, r, s);
                    if v != 0.0 {
                        writeln!(out, "{} {} {} {} {:.16e}", p + 1, q + 1, r + 1, s + 1, v).unwrap();
                    }
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..=p {
            let v = ints.h()[(p, q)];
            if v != 0.0 {
                writeln!(out, "{} {} 0 0 {:.16e}", p + 1, q + 1, v).unwrap();
            }
        }
    }
    writeln!(out, "0 0 0 0 {:.16e}", ints.e_core()).unwrap();
    out
}

/// SHA-256 of the canonical text form, hex encoded.
pub fn model_hash(ints: &MolecularIntegrals, n_electrons: usize) -> String {
    hex::encode(Sha256::digest(integrals_to_string(ints, n_electrons).as_bytes()))
}

pub fn write_integrals(ints: &MolecularIntegrals, n_electrons: usize, path: &Path) -> Result<()> {
    fs::write(path, integrals_to_string(ints, n_electrons))?;
    Ok(())
}

pub fn read_integrals(path: &Path) -> Result<IntegralFile> {
    let text = fs::read_to_string(path)?;
    parse_integrals(&text, path)
}

#[derive(Clone, Copy)]
enum Key {
    Core,
    One(usize, usize),
    Two(usize, usize, usize, usize),
}

pub fn parse_integrals(text: &str, path: &Path) -> Result<IntegralFile> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut header: Option<(usize, usize)> = None;
    // canonical key -> (raw tuple, value, line)
    let mut entries: HashMap<(usize, usize, usize, usize), ([usize; 4], f64, usize)> = HashMap::new();
    let mut order: Vec<(usize, usize, usize, usize)> = Vec::new();
    let mut duplicates = 0;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((n, _)) = header else {
            header = Some(parse_header(line).map_err(|m| err(lineno, m))?);
            continue;
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(lineno, format!("expected 'p q r s value', found {} fields", fields.len())));
        }
        let mut idx = [0usize; 4];
        for k in 0..4 {
            idx[k] = fields[k]
                .parse()
                .map_err(|_| err(lineno, format!("bad index '{}'", fields[k])))?;
            if idx[k] > n {
                return Err(err(lineno, format!("index {} exceeds NORB={n}", idx[k])));
            }
        }
        let value: f64 = fields[4]
            .parse()
            .map_err(|_| err(lineno, format!("bad value '{}'", fields[4])))?;
        if !value.is_finite() {
            return Err(err(lineno, format!("non-finite value '{}'", fields[4])));
        }
        let key = match idx {
            [0, 0, 0, 0] => Key::Core,
            [p, q, 0, 0] if p > 0 && q > 0 => Key::One(p - 1, q - 1),
            [p, q, r, s] if p > 0 && q > 0 && r > 0 && s > 0 => Key::Two(p - 1, q - 1, r - 1, s - 1),
            _ => return Err(err(lineno, format!("invalid index pattern {idx:?}"))),
        };
        let canon = match key {
            Key::Core => (usize::MAX, usize::MAX, usize::MAX, usize::MAX),
            Key::One(p, q) => (p.max(q), p.min(q), usize::MAX, usize::MAX),
            Key::Two(p, q, r, s) => canonical_index(p, q, r, s),
        };
        match entries.get(&canon) {
            Some(&(prev, prev_value, prev_line)) => {
                if prev == idx {
                    duplicates += 1;
                } else if (prev_value - value).abs() > 1e-12 {
                    return Err(err(
                        lineno,
                        format!(
                            "symmetry violation: {idx:?} = {value} but equivalent {prev:?} = {prev_value} on line {prev_line}"
                        ),
                    ));
                }
                entries.insert(canon, (idx, value, lineno));
            }
            None => {
                order.push(canon);
                entries.insert(canon, (idx, value, lineno));
            }
        }
    }
    let (n, n_electrons) = header.ok_or_else(|| err(0, "missing 'NORB=<N> NELEC=<n>' header".into()))?;
    if n_electrons > n {
        return Err(err(1, format!("NELEC={n_electrons} exceeds NORB={n}")));
    }
    let mut ints = MolecularIntegrals::zeros(n);
    for canon in order {
        let (idx, value, _) = entries[&canon];
        match idx {
            [0, 0, 0, 0] => ints.set_e_core(value),
            [p, q, 0, 0] => ints.set_h_sym(p - 1, q - 1, value),
            [p, q, r, s] => ints.set_g_sym(p - 1, q - 1, r - 1, s - 1, value),
        }
    }
    Ok(IntegralFile {
        integrals: ints,
        n_electrons,
        duplicates,
    })
}

fn parse_header(line: &str) -> std::result::Result<(usize, usize), String> {
    let mut norb = None;
    let mut nelec = None;
    for tok in line.split(|c: char| c.is_whitespace() || c == ',') {
        if tok.is_empty() {
            continue;
        }
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| format!("expected 'NORB=<N> NELEC=<n>' header, found '{line}'"))?;
        let v: usize = v.parse().map_err(|_| format!("bad header value '{v}'"))?;
        match k.trim().to_ascii_uppercase().as_str() {
            "NORB" => norb = Some(v),
            "NELEC" => nelec = Some(v),
            other => return Err(format!("unknown header key '{other}'")),
        }
    }
    match (norb, nelec) {
        (Some(n), Some(e)) if n <= crate::fock::MAX_MODES => Ok((n, e)),
        (Some(n), Some(_)) => Err(format!("NORB={n} exceeds {}", crate::fock::MAX_MODES)),
        _ => Err(format!("expected 'NORB=<N> NELEC=<n>' header, found '{line}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_model;

    fn parse(text: &str) -> Result<IntegralFile> {
        parse_integrals(text, Path::new("test.int"))
    }

    #[test]
    fn round_trip_is_exact() {
        let m = random_model(6, 21).unwrap().with_e_core(-2.718_281_828_459_045_1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.int");
        write_integrals(&m, 3, &path).unwrap();
        let back = read_integrals(&path).unwrap();
        assert_eq!(back.integrals, m);
        assert_eq!(back.n_electrons, 3);
        assert_eq!(back.duplicates, 0);
    }

    #[test]
    fn core_energy_only() {
        let f = parse("NORB=3 NELEC=1\n0 0 0 0 1.5\n").unwrap();
        assert_eq!(f.integrals.e_core(), 1.5);
        assert!(f.integrals.h().iter().all(|&x| x == 0.0));
        assert!(!f.integrals.has_two_body());
    }

    #[test]
    fn duplicates_last_wins() {
        let f = parse("NORB=2 NELEC=1\n1 2 0 0 0.1\n1 2 0 0 0.2 # again\n1 1 2 2 0.3\n1 1 2 2 0.4\n").unwrap();
        assert_eq!(f.duplicates, 2);
        assert_eq!(f.integrals.h()[(1, 0)], 0.2);
        assert_eq!(f.integrals.g(1, 1, 0, 0), 0.4);
    }

    #[test]
    fn symmetry_violation_reports_line() {
        let err = parse("NORB=2 NELEC=1\n1 2 1 1 0.1\n2 1 1 1 0.2\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("symmetry"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse("NORB=2 NELEC=1\n1 2 1 1 0.1\n2 1 1 1 0.1\n").is_ok());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("1 1 0 0 0.5\n", 1),
            ("NORB=2 NELEC=1\n1 1 0 0\n", 2),
            ("NORB=2 NELEC=1\n# c\n3 1 0 0 1.0\n", 3),
            ("NORB=2 NELEC=1\n1 0 1 0 1.0\n", 2),
            ("NORB=2 NELEC=1\n1 1 0 0 abc\n", 2),
        ];
        for (text, expected) in cases {
            match parse(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, expected, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(parse("# only comments\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let m = random_model(3, 1).unwrap();
        assert_eq!(model_hash(&m, 1), model_hash(&m.clone(), 1));
        assert_ne!(model_hash(&m, 1), model_hash(&m.clone().with_e_core(1.0), 1));
    }
}
