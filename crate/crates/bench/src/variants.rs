use std::fmt;
use std::str::FromStr;

use metadist::{RoleGraph, Signature, Value};

use crate::BenchError;

const SPECS: [&str; 5] = [
    include_str!("../specs/hpd1.json"),
    include_str!("../specs/hpd2.json"),
    include_str!("../specs/hpd3.json"),
    include_str!("../specs/hpd4.json"),
    include_str!("../specs/hpd5.json"),
];

pub const VARIANTS: [u8; 5] = [1, 2, 3, 4, 5];

/// JSON domain description shipped for variant `id`.
pub fn variant_spec_json(id: u8) -> Result<&'static str, BenchError> {
    SPECS.get((id as usize).wrapping_sub(1)).copied().ok_or(BenchError::UnknownVariant(id))
}

pub fn build_variant(id: u8) -> Result<RoleGraph, BenchError> {
    RoleGraph::from_json(variant_spec_json(id)?).map_err(|e| BenchError::Variant(id, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Size {
    VS,
    S,
    M,
    L,
}

impl Size {
    pub const ALL: [Size; 4] = [Size::VS, Size::S, Size::M, Size::L];

    /// Scale relative to VS, in halves.
    fn halves(self) -> usize {
        match self {
            Size::VS => 2,
            Size::S => 3,
            Size::M => 4,
            Size::L => 5,
        }
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Size::VS => "VS",
            Size::S => "S",
            Size::M => "M",
            Size::L => "L",
        })
    }
}

impl FromStr for Size {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.to_ascii_uppercase().as_str() {
            "VS" => Ok(Size::VS),
            "S" => Ok(Size::S),
            "M" => Ok(Size::M),
            "L" => Ok(Size::L),
            _ => Err(BenchError::Parse(format!("unknown size `{s}` (expected VS, S, M or L)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arch {
    Mlp,
    Cnn,
}

impl Arch {
    pub const ALL: [Arch; 2] = [Arch::Mlp, Arch::Cnn];
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Mlp => "MLP",
            Arch::Cnn => "CNN",
        })
    }
}

impl FromStr for Arch {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.to_ascii_uppercase().as_str() {
            "MLP" => Ok(Arch::Mlp),
            "CNN" => Ok(Arch::Cnn),
            _ => Err(BenchError::Parse(format!("unknown architecture `{s}` (expected MLP or CNN)"))),
        }
    }
}

/// A dataset family, e.g. `HPD-3-VS-MLP`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariantSpec {
    pub variant: u8,
    pub size: Size,
    pub arch: Arch,
}

impl fmt::Display for VariantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HPD-{}-{}-{}", self.variant, self.size, self.arch)
    }
}

/// Rows per subproblem at size VS: optimizer (absent when fixed), layers, count.
const VS_ROWS: [&[(Option<&str>, i64, usize)]; 5] = [
    &[(None, 1, 20), (None, 2, 30), (None, 3, 40)],
    &[(None, 1, 50), (None, 2, 60), (None, 3, 70)],
    &[(Some("ASGD"), 1, 50), (Some("ASGD"), 2, 60), (Some("ADAM"), 1, 50), (Some("ADAM"), 2, 60)],
    &[(Some("ASGD"), 1, 50), (Some("ASGD"), 2, 60), (Some("ADAM"), 1, 50), (Some("ADAM"), 2, 60), (Some("ADAM"), 3, 70)],
    &[(Some("ASGD"), 1, 60), (Some("ASGD"), 2, 70), (Some("ADAM"), 1, 60), (Some("ADAM"), 2, 70), (Some("ADAM"), 3, 80)],
];

/// `(optimizer, layers, count)`; the optimizer is `None` where the variant has none.
pub type Subproblem = (Option<&'static str>, i64, usize);

/// Per-subproblem row counts.
pub fn subproblem_sizes(variant: u8, size: Size) -> Result<Vec<Subproblem>, BenchError> {
    let rows = VS_ROWS.get((variant as usize).wrapping_sub(1)).ok_or(BenchError::UnknownVariant(variant))?;
    Ok(rows.iter().map(|&(o, l, n)| (o, l, n * size.halves() / 2)).collect())
}

/// Row count of every signature of `g`, matched through the optimizer and
/// layer values fixing it.
pub fn signature_sizes(g: &RoleGraph, sigs: &[Signature], variant: u8, size: Size) -> Result<Vec<usize>, BenchError> {
    let rows = subproblem_sizes(variant, size)?;
    let l = g.var("l").map_err(|e| BenchError::Variant(variant, e.to_string()))?;
    let o = g.var("o").ok();
    sigs.iter()
        .map(|s| {
            let fixed = |v| s.fixed.iter().find(|f| f.0 == v).map(|f| f.1);
            let layers = match fixed(l) {
                Some(Value::Int(k)) => k,
                _ => return Err(BenchError::Variant(variant, "signature does not fix `l`".into())),
            };
            let opt = o.and_then(fixed).map(|x| g.format_value(o.unwrap(), x));
            rows.iter()
                .find(|r| r.1 == layers && r.0 == opt.as_deref())
                .map(|r| r.2)
                .ok_or_else(|| BenchError::Variant(variant, format!("no size row for signature {:?}", s.fixed)))
        })
        .collect()
}
