//! Structured candidates for `--fi-file`.
//!
//! ```json
//! {"name": "J", "family": "aut", "kt3": [0,0,0,1,0,0,0,0,0,-1], "b": ["3*x", "-3*y"], "s": 0}
//! ```
//! `kt3` is used by `aut`; `gen` (15 numbers) by `lin_t` and `exp`. `kt2` is C_ab for
//! `aut` and D_ab for `lin_t`. Vector and scalar parts are expressions in (x, y).

use std::collections::BTreeMap;
use std::path::Path;

use cfi_core::conditions::{CandidateCFI, Family};
use cfi_core::expr::{parse_with_defs, Expr, Params};
use cfi_core::geometry::{KT2Params, KT3Params, SymGenParams};
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiSpec {
    pub name: Option<String>,
    pub family: Family,
    #[serde(default)]
    pub kt3: Option<[f64; 10]>,
    #[serde(default)]
    pub gen: Option<[f64; 15]>,
    #[serde(default)]
    pub kt2: Option<[f64; 6]>,
    pub b: [String; 2],
    #[serde(default)]
    pub g: Option<String>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(FiSpec),
    Many(Vec<FiSpec>),
}

pub fn read(path: &Path) -> Result<Vec<FiSpec>, Failure> {
    let text = std::fs::read_to_string(path)?;
    let parsed: OneOrMany = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: not a candidate or list of candidates ({e})", path.display())))?;
    Ok(match parsed {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

impl FiSpec {
    pub fn candidate(&self, defs: &BTreeMap<String, Expr>, params: &Params) -> Result<CandidateCFI, Failure> {
        let ex = |s: &str| -> Result<Expr, Failure> { Ok(parse_with_defs(s, defs)?.bind(params)) };
        let b = [ex(&self.b[0])?, ex(&self.b[1])?];
        let missing = |what: &str| Failure::Usage(format!("family {:?} needs `{what}`", self.family));
        let c = match self.family {
            Family::Aut => {
                let kt3 = KT3Params { a: self.kt3.ok_or_else(|| missing("kt3"))? };
                match self.kt2 {
                    Some(c) => CandidateCFI::aut_with_c(kt3, KT2Params::from_slice(&c), b),
                    None => CandidateCFI::aut(kt3, b, self.s.unwrap_or(0.0)),
                }
            }
            Family::LinT => {
                let gen = SymGenParams { b: self.gen.ok_or_else(|| missing("gen"))? };
                let d = KT2Params::from_slice(&self.kt2.unwrap_or_default());
                CandidateCFI::lin_t(gen, d, b, ex(self.g.as_deref().unwrap_or("0"))?)
            }
            Family::Exp => {
                let gen = SymGenParams { b: self.gen.ok_or_else(|| missing("gen"))? };
                CandidateCFI::exp(gen, self.lambda.ok_or_else(|| missing("lambda"))?, b)
            }
        };
        c.validate()?;
        Ok(c)
    }
}
