//! Versioned text fixtures pinning the shipped code instances.
//!
//! Instances whose construction involves floating-point reliability sorting
//! (polar) or randomized graph growth (LDPC) are frozen into fixture files
//! and loaded from them at runtime, so every build reconciles with
//! bit-identical code definitions regardless of platform math libraries.
//! Each fixture is a line-oriented document: a magic header line followed by
//! `key: value` pairs; list values are space-separated integers and the
//! `check` key repeats once per parity row.

use std::fmt::Write as _;
use std::sync::OnceLock;

use super::bch::BchCode;
use super::ldpc::LdpcCode;
use super::polar::PolarCode;
use thiserror::Error;

pub const HEADER: &str = "phyauth-code-fixture v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FixtureError {
    #[error("missing or unsupported header line")]
    BadHeader,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("malformed fixture: {0}")]
    Malformed(String),
}

#[derive(Debug)]
struct Doc<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Doc<'a> {
    fn parse(text: &'a str) -> Result<Self, FixtureError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some(HEADER) {
            return Err(FixtureError::BadHeader);
        }
        let mut pairs = Vec::new();
        for line in lines {
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| FixtureError::Malformed(format!("not a key-value line: {line}")))?;
            pairs.push((key.trim(), value.trim()));
        }
        Ok(Doc { pairs })
    }

    fn scalar(&self, key: &'static str) -> Result<&'a str, FixtureError> {
        let mut found = None;
        for &(k, v) in &self.pairs {
            if k == key {
                if found.is_some() {
                    return Err(FixtureError::Malformed(format!("duplicate field `{key}`")));
                }
                found = Some(v);
            }
        }
        found.ok_or(FixtureError::MissingField(key))
    }

    fn number<T: std::str::FromStr>(&self, key: &'static str) -> Result<T, FixtureError> {
        self.scalar(key)?
            .parse()
            .map_err(|_| FixtureError::Malformed(format!("field `{key}` is not a number")))
    }

    fn int_list(value: &str, key: &str) -> Result<Vec<usize>, FixtureError> {
        value
            .split_whitespace()
            .map(|tok| {
                tok.parse()
                    .map_err(|_| FixtureError::Malformed(format!("bad integer in `{key}`: {tok}")))
            })
            .collect()
    }

    fn repeated(&self, key: &str) -> Vec<&'a str> {
        self.pairs
            .iter()
            .filter(|&&(k, _)| k == key)
            .map(|&(_, v)| v)
            .collect()
    }
}

pub struct LdpcFixture {
    pub seed: u64,
    pub code: LdpcCode,
}

pub fn render_ldpc(seed: u64, code: &LdpcCode) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "family: ldpc").unwrap();
    writeln!(out, "n: {}", code.n()).unwrap();
    writeln!(out, "checks: {}", code.syndrome_len()).unwrap();
    writeln!(out, "seed: {seed}").unwrap();
    for row in code.check_lists() {
        let vars: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "check: {}", vars.join(" ")).unwrap();
    }
    out
}

pub fn parse_ldpc(text: &str) -> Result<LdpcFixture, FixtureError> {
    let doc = Doc::parse(text)?;
    if doc.scalar("family")? != "ldpc" {
        return Err(FixtureError::Malformed("family is not ldpc".into()));
    }
    let n: usize = doc.number("n")?;
    let checks: usize = doc.number("checks")?;
    let seed: u64 = doc.number("seed")?;
    let rows = doc.repeated("check");
    if rows.len() != checks {
        return Err(FixtureError::Malformed(format!(
            "expected {checks} parity rows, found {}",
            rows.len()
        )));
    }
    let mut check_vars = Vec::with_capacity(checks);
    for row in rows {
        let vars = Doc::int_list(row, "check")?;
        if vars.iter().any(|&v| v >= n) {
            return Err(FixtureError::Malformed("variable index out of range".into()));
        }
        check_vars.push(vars.into_iter().map(|v| v as u32).collect());
    }
    Ok(LdpcFixture {
        seed,
        code: LdpcCode::from_check_lists(n, check_vars),
    })
}

pub fn render_polar(design_p: f64, code: &PolarCode) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "family: polar").unwrap();
    writeln!(out, "n: {}", code.n()).unwrap();
    writeln!(out, "k: {}", code.k()).unwrap();
    writeln!(out, "crc: {}", code.crc_len()).unwrap();
    writeln!(out, "design-p: {design_p}").unwrap();
    let revealed: Vec<String> = code.revealed_naturals().iter().map(|v| v.to_string()).collect();
    writeln!(out, "revealed: {}", revealed.join(" ")).unwrap();
    out
}

pub fn parse_polar(text: &str) -> Result<PolarCode, FixtureError> {
    let doc = Doc::parse(text)?;
    if doc.scalar("family")? != "polar" {
        return Err(FixtureError::Malformed("family is not polar".into()));
    }
    let n: usize = doc.number("n")?;
    let k: usize = doc.number("k")?;
    let crc: usize = doc.number("crc")?;
    if !n.is_power_of_two() || n < 2 {
        return Err(FixtureError::Malformed("n must be a power of two".into()));
    }
    let revealed = Doc::int_list(doc.scalar("revealed")?, "revealed")?;
    if revealed.windows(2).any(|w| w[0] >= w[1]) || revealed.iter().any(|&i| i >= n) {
        return Err(FixtureError::Malformed(
            "revealed set must be strictly ascending and in range".into(),
        ));
    }
    if n != k + crc + revealed.len() {
        return Err(FixtureError::Malformed(format!(
            "inconsistent dimensions: n={n}, k={k}, crc={crc}, revealed={}",
            revealed.len()
        )));
    }
    Ok(PolarCode::from_revealed(n.trailing_zeros(), crc, revealed))
}

pub fn render_bch(prim_poly: u32, code: &BchCode) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "family: bch").unwrap();
    writeln!(out, "n: {}", code.n()).unwrap();
    writeln!(out, "k: {}", code.k()).unwrap();
    writeln!(out, "t: {}", code.t()).unwrap();
    writeln!(out, "field-width: {}", code.field_width()).unwrap();
    writeln!(out, "prim-poly: {prim_poly:#x}").unwrap();
    writeln!(out, "generator: {}", code.generator_bits().to_hex()).unwrap();
    out
}

pub fn parse_bch(text: &str) -> Result<BchCode, FixtureError> {
    let doc = Doc::parse(text)?;
    if doc.scalar("family")? != "bch" {
        return Err(FixtureError::Malformed("family is not bch".into()));
    }
    let w: u32 = doc.number("field-width")?;
    let t: usize = doc.number("t")?;
    let prim = doc.scalar("prim-poly")?;
    let prim = prim
        .strip_prefix("0x")
        .and_then(|h| u32::from_str_radix(h, 16).ok())
        .ok_or_else(|| FixtureError::Malformed("prim-poly must be hex".into()))?;
    let code = BchCode::new(w, prim, t);
    let n: usize = doc.number("n")?;
    let k: usize = doc.number("k")?;
    if (code.n(), code.k()) != (n, k) {
        return Err(FixtureError::Malformed(format!(
            "recorded dimensions ({n}, {k}) disagree with construction ({}, {})",
            code.n(),
            code.k()
        )));
    }
    if code.generator_bits().to_hex() != doc.scalar("generator")? {
        return Err(FixtureError::Malformed("generator polynomial mismatch".into()));
    }
    Ok(code)
}

/// The shipped rate-1/2 (3,6)-regular instance, 512 variables and 256
/// independent parity checks.
pub fn ldpc_3_6_512() -> &'static LdpcCode {
    static CODE: OnceLock<LdpcCode> = OnceLock::new();
    CODE.get_or_init(|| {
        let fx = parse_ldpc(include_str!("../../fixtures/ldpc_3_6_512.txt"))
            .expect("embedded fixture must parse");
        assert_eq!((fx.code.n(), fx.code.syndrome_len()), (512, 256));
        fx.code
    })
}

/// The length-512 polar instance: 267 payload bits plus an 11-bit CRC,
/// 245 syndrome bits.
pub fn polar_512_267() -> &'static PolarCode {
    static CODE: OnceLock<PolarCode> = OnceLock::new();
    CODE.get_or_init(|| {
        let code = parse_polar(include_str!("../../fixtures/polar_512_267.txt"))
            .expect("embedded fixture must parse");
        assert_eq!((code.n(), code.k(), code.crc_len()), (512, 267, 11));
        code
    })
}

/// The length-1024 polar instance: 523 payload bits plus an 11-bit CRC.
pub fn polar_1024_523() -> &'static PolarCode {
    static CODE: OnceLock<PolarCode> = OnceLock::new();
    CODE.get_or_init(|| {
        let code = parse_polar(include_str!("../../fixtures/polar_1024_523.txt"))
            .expect("embedded fixture must parse");
        assert_eq!((code.n(), code.k(), code.crc_len()), (1024, 523, 11));
        code
    })
}

/// Names of every builtin code instance, resolvable by [`by_name`].
pub const BUILTIN_NAMES: [&str; 6] = [
    "ldpc-3-6-512",
    "polar-512-267",
    "polar-1024-523",
    "bch-15-7-2",
    "bch-511-259-30",
    "bch-511-184-45",
];

/// Looks up a builtin instance by its fixture name.
pub fn by_name(name: &str) -> Option<super::SlepianWolfCode> {
    use super::bch::{bch_15_7_2, bch_511_259_30, bch_511_t45};
    use super::SlepianWolfCode as C;
    match name {
        "ldpc-3-6-512" => Some(C::Ldpc(ldpc_3_6_512().clone())),
        "polar-512-267" => Some(C::Polar(polar_512_267().clone())),
        "polar-1024-523" => Some(C::Polar(polar_1024_523().clone())),
        "bch-15-7-2" => Some(C::Bch(bch_15_7_2().clone())),
        "bch-511-259-30" => Some(C::Bch(bch_511_259_30().clone())),
        "bch-511-184-45" => Some(C::Bch(bch_511_t45().clone())),
        _ => None,
    }
}
