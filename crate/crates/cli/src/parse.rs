//! Input parsing: boundary tokens with `inf`, complex numbers like
//! `0.1+0.05i`, lamination files and inline/orbit sources.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use liouville_core::hyp::{Geodesic, MobiusMap};
use liouville_core::lamination::orbit_lamination;
use liouville_core::{Error as CoreError, FiniteLamination};

/// `inf` → `None`; otherwise a real number.
pub fn parse_boundary_token(tok: &str) -> Result<Option<f64>, String> {
    let t = tok.trim();
    if t.eq_ignore_ascii_case("inf") || t == "∞" {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|e| format!("bad boundary point `{tok}`: {e}"))
}

/// Complex numbers in the forms `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i`.
pub fn parse_complex(s: &str) -> Result<num_complex::Complex64, String> {
    let t: String = s.trim().replace(' ', "");
    let bad = |m: &str| Err(format!("bad complex number `{s}`: {m}"));
    if t.is_empty() {
        return bad("empty");
    }
    if let Some(im_part) = t.strip_suffix('i') {
        // find the split between real and imaginary parts: the last +/-
        // that is not an exponent sign and not leading
        let bytes = im_part.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            let c = bytes[k] as char;
            if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
                split = Some(k);
                break;
            }
        }
        let (re_s, im_s) = match split {
            Some(k) => (&im_part[..k], &im_part[k..]),
            None => ("0", im_part),
        };
        let re: f64 = if re_s.is_empty() {
            0.0
        } else {
            match re_s.parse() {
                Ok(v) => v,
                Err(_) => return bad("real part"),
            }
        };
        let im: f64 = match im_s {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => match other.parse() {
                Ok(v) => v,
                Err(_) => return bad("imaginary part"),
            },
        };
        Ok(num_complex::Complex64::new(re, im))
    } else {
        match t.parse::<f64>() {
            Ok(v) => Ok(num_complex::Complex64::new(v, 0.0)),
            Err(_) => bad("not a number"),
        }
    }
}

fn geodesic_from(p: Option<f64>, q: Option<f64>) -> Result<Geodesic, CoreError> {
    Geodesic::from_parts(p, q)
}

pub enum LaminationSource {
    Leaves(Vec<(Option<f64>, Option<f64>, f64)>),
    File(PathBuf),
    Orbit { matrix: [f64; 4], seed: (Option<f64>, Option<f64>), weight: f64, n: u32 },
}

impl LaminationSource {
    /// Exactly one of the three sources must be given.
    pub fn from_cli(
        leaf: &[String],
        file: &Option<PathBuf>,
        orbit: &Option<String>,
    ) -> Result<Self, String> {
        let given = [!leaf.is_empty(), file.is_some(), orbit.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if given != 1 {
            return Err(
                "give exactly one lamination source: --leaf (repeatable), --lamination FILE, or --orbit SPEC"
                    .into(),
            );
        }
        if !leaf.is_empty() {
            if leaf.len() % 3 != 0 {
                return Err("--leaf needs three tokens: P_MINUS P_PLUS WEIGHT".into());
            }
            let mut leaves = Vec::new();
            for chunk in leaf.chunks(3) {
                let p = parse_boundary_token(&chunk[0])?;
                let q = parse_boundary_token(&chunk[1])?;
                let w: f64 = chunk[2]
                    .parse()
                    .map_err(|e| format!("bad weight `{}`: {e}", chunk[2]))?;
                leaves.push((p, q, w));
            }
            return Ok(Self::Leaves(leaves));
        }
        if let Some(path) = file {
            return Ok(Self::File(path.clone()));
        }
        let spec = orbit.as_ref().unwrap();
        let parts: Vec<&str> = spec.split('/').map(str::trim).collect();
        if parts.len() != 4 {
            return Err("orbit spec is `a b c d / seed_p seed_q / weight / n`".into());
        }
        let nums = |s: &str| -> Result<Vec<f64>, String> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| format!("bad orbit number `{t}`: {e}")))
                .collect()
        };
        let m = nums(parts[0])?;
        if m.len() != 4 {
            return Err("orbit matrix needs four entries".into());
        }
        let seed_toks: Vec<&str> = parts[1].split_whitespace().collect();
        if seed_toks.len() != 2 {
            return Err("orbit seed needs two endpoints".into());
        }
        let seed = (parse_boundary_token(seed_toks[0])?, parse_boundary_token(seed_toks[1])?);
        let weight: f64 = parts[2].parse().map_err(|e| format!("bad orbit weight: {e}"))?;
        let n: u32 = parts[3].parse().map_err(|e| format!("bad orbit count: {e}"))?;
        Ok(Self::Orbit { matrix: [m[0], m[1], m[2], m[3]], seed, weight, n })
    }

    pub fn describe(&self) -> Value {
        match self {
            Self::Leaves(ls) => json!({
                "kind": "leaves",
                "leaves": ls.iter().map(|(p, q, w)| json!({
                    "p_minus": p.map_or("inf".to_string(), |v| v.to_string()),
                    "p_plus": q.map_or("inf".to_string(), |v| v.to_string()),
                    "weight": w,
                })).collect::<Vec<_>>(),
            }),
            Self::File(p) => json!({ "kind": "file", "path": p.display().to_string() }),
            Self::Orbit { matrix, seed, weight, n } => json!({
                "kind": "orbit",
                "matrix": matrix.to_vec(),
                "seed": [
                    seed.0.map_or("inf".to_string(), |v| v.to_string()),
                    seed.1.map_or("inf".to_string(), |v| v.to_string()),
                ],
                "weight": weight,
                "n": n,
            }),
        }
    }
}

pub enum ReadError {
    Input(String),
    Core(CoreError),
}

impl From<CoreError> for ReadError {
    fn from(e: CoreError) -> Self {
        Self::Core(e)
    }
}

pub fn read_lamination(source: &LaminationSource) -> Result<FiniteLamination, ReadError> {
    match source {
        LaminationSource::Leaves(ls) => {
            let mut leaves = Vec::new();
            for (p, q, w) in ls {
                leaves.push((geodesic_from(*p, *q)?, *w));
            }
            FiniteLamination::new(leaves).map_err(ReadError::from)
        }
        LaminationSource::File(path) => parse_lamination_file(path),
        LaminationSource::Orbit { matrix, seed, weight, n } => {
            let gamma = MobiusMap::from_reals(matrix[0], matrix[1], matrix[2], matrix[3])?;
            let seed = geodesic_from(seed.0, seed.1)?;
            orbit_lamination(&gamma, &seed, *weight, *n).map_err(ReadError::from)
        }
    }
}

/// One leaf per line: `p_minus p_plus weight`, `inf` accepted as an endpoint
/// token, `#` starts a comment.
pub fn parse_lamination_file(path: &Path) -> Result<FiniteLamination, ReadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ReadError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut leaves = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(ReadError::Input(format!(
                "{}:{}: expected `p_minus p_plus weight`",
                path.display(),
                lineno + 1
            )));
        }
        let p = parse_boundary_token(toks[0]).map_err(ReadError::Input)?;
        let q = parse_boundary_token(toks[1]).map_err(ReadError::Input)?;
        let w: f64 = toks[2].parse().map_err(|e| {
            ReadError::Input(format!("{}:{}: bad weight: {e}", path.display(), lineno + 1))
        })?;
        leaves.push((geodesic_from(p, q)?, w));
    }
    FiniteLamination::new(leaves).map_err(ReadError::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("0.5").unwrap(), num_complex::Complex64::new(0.5, 0.0));
        assert_eq!(parse_complex("0.1+0.05i").unwrap(), num_complex::Complex64::new(0.1, 0.05));
        assert_eq!(parse_complex("-0.1-2i").unwrap(), num_complex::Complex64::new(-0.1, -2.0));
        assert_eq!(parse_complex("i").unwrap(), num_complex::Complex64::new(0.0, 1.0));
        assert_eq!(parse_complex("-i").unwrap(), num_complex::Complex64::new(0.0, -1.0));
        assert_eq!(parse_complex("3i").unwrap(), num_complex::Complex64::new(0.0, 3.0));
        assert_eq!(parse_complex("1e-2+1e-3i").unwrap(), num_complex::Complex64::new(0.01, 0.001));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn boundary_tokens() {
        assert_eq!(parse_boundary_token("inf").unwrap(), None);
        assert_eq!(parse_boundary_token("2.5").unwrap(), Some(2.5));
        assert!(parse_boundary_token("nope").is_err());
    }
}
