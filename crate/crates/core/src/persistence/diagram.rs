//! Persistence diagrams and their text format.

use std::io::{BufRead, Write};

use crate::complex::Filtration;
use crate::error::{Result, TopoError};
use crate::persistence::pairing::PersistencePairing;

/// A point of a persistence diagram. `death` is `f64::INFINITY` for
/// essential classes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagramPoint {
    pub birth: f64,
    pub death: f64,
}

impl DiagramPoint {
    pub fn new(birth: f64, death: f64) -> Self {
        DiagramPoint { birth, death }
    }

    pub fn is_essential(&self) -> bool {
        self.death.is_infinite()
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Per-dimension multisets of diagram points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub dims: Vec<Vec<DiagramPoint>>,
}

/// Diagram of `f` read off `pairing`: finite points in pairing order, then
/// essential points. With `drop_zero`, points with birth = death are
/// omitted.
pub fn diagram(f: &Filtration, pairing: &PersistencePairing, drop_zero: bool) -> PersistenceDiagram {
    let dims = pairing.pairs.len().max(pairing.unpaired.len());
    let mut out = vec![Vec::new(); dims];
    for (p, pairs) in pairing.pairs.iter().enumerate() {
        for &(b, d) in pairs {
            let pt = DiagramPoint::new(f.value(b), f.value(d));
            if drop_zero && pt.birth == pt.death {
                continue;
            }
            out[p].push(pt);
        }
    }
    for (p, ess) in pairing.unpaired.iter().enumerate() {
        for &s in ess {
            out[p].push(DiagramPoint::new(f.value(s), f64::INFINITY));
        }
    }
    PersistenceDiagram { dims: out }
}

impl PersistenceDiagram {
    /// Finite points of dimension `p`.
    pub fn ordinary(&self, p: usize) -> Vec<DiagramPoint> {
        self.dims
            .get(p)
            .map(|v| v.iter().copied().filter(|x| !x.is_essential()).collect())
            .unwrap_or_default()
    }

    pub fn points(&self, p: usize) -> &[DiagramPoint] {
        self.dims.get(p).map_or(&[], Vec::as_slice)
    }

    pub fn essential_count(&self, p: usize) -> usize {
        self.points(p).iter().filter(|x| x.is_essential()).count()
    }

    /// `dim,birth,death` table; deaths of essential points print as `inf`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dim,birth,death")?;
        for (p, pts) in self.dims.iter().enumerate() {
            for x in pts {
                writeln!(w, "{p},{},{}", fmt_f64(x.birth), fmt_f64(x.death))?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut dims: Vec<Vec<DiagramPoint>> = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("dim")) {
                continue;
            }
            let parse_err = |msg: String| TopoError::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, got {}", fields.len())));
            }
            let p: usize = fields[0]
                .parse()
                .map_err(|e| parse_err(format!("bad dimension {:?}: {e}", fields[0])))?;
            let birth = parse_f64(fields[1]).ok_or_else(|| parse_err(format!("bad birth {:?}", fields[1])))?;
            let death = parse_f64(fields[2]).ok_or_else(|| parse_err(format!("bad death {:?}", fields[2])))?;
            if !birth.is_finite() || death < birth || death.is_nan() {
                return Err(parse_err(format!("invalid point ({birth}, {death})")));
            }
            if dims.len() <= p {
                dims.resize(p + 1, Vec::new());
            }
            dims[p].push(DiagramPoint::new(birth, death));
        }
        Ok(PersistenceDiagram { dims })
    }
}

/// 17 significant digits, `inf` for infinity.
pub(crate) fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub(crate) fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" | "Inf" | "infinity" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}
