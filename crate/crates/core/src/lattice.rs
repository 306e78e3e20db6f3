//! Periodic spin lattices and their nearest-neighbour bonds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Chain,
    Square,
}

impl LatticeKind {
    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::Chain => "chain",
            LatticeKind::Square => "square",
        }
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(LatticeKind::Chain),
            "square" => Ok(LatticeKind::Square),
            other => Err(Error::Config(format!("unknown lattice kind {other:?}"))),
        }
    }
}

/// Site count and bond list of a periodic lattice. Bonds satisfy `i < j`
/// and are sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeGeometry {
    kind: LatticeKind,
    side_length: usize,
    num_sites: usize,
    bonds: Vec<(usize, usize)>,
}

impl LatticeGeometry {
    pub fn new(kind: LatticeKind, side_length: usize) -> Result<Self> {
        match kind {
            LatticeKind::Chain => build_chain(side_length),
            LatticeKind::Square => build_square(side_length),
        }
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn side_length(&self) -> usize {
        self.side_length
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    /// Sorted neighbour list of `site`.
    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .bonds
            .iter()
            .filter_map(|&(i, j)| {
                if i == site {
                    Some(j)
                } else if j == site {
                    Some(i)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Human-readable label such as `1x8` or `3x3`.
    pub fn label(&self) -> String {
        match self.kind {
            LatticeKind::Chain => format!("1x{}", self.side_length),
            LatticeKind::Square => format!("{0}x{0}", self.side_length),
        }
    }
}

fn normalized(mut bonds: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    for b in bonds.iter_mut() {
        if b.0 > b.1 {
            *b = (b.1, b.0);
        }
    }
    bonds.sort_unstable();
    bonds.dedup();
    bonds
}

/// Periodic ring of `l` sites.
pub fn build_chain(l: usize) -> Result<LatticeGeometry> {
    if l < 3 {
        return Err(Error::Geometry(format!(
            "periodic chain needs at least 3 sites, got {l}"
        )));
    }
    let bonds = normalized((0..l).map(|i| (i, (i + 1) % l)).collect());
    Ok(LatticeGeometry {
        kind: LatticeKind::Chain,
        side_length: l,
        num_sites: l,
        bonds,
    })
}

/// Periodic `l × l` square lattice, sites indexed row-major.
pub fn build_square(l: usize) -> Result<LatticeGeometry> {
    if l < 3 {
        return Err(Error::Geometry(format!(
            "periodic square lattice needs side length at least 3, got {l}"
        )));
    }
    let site = |r: usize, c: usize| r * l + c;
    let mut bonds = Vec::with_capacity(2 * l * l);
    for r in 0..l {
        for c in 0..l {
            bonds.push((site(r, c), site(r, (c + 1) % l)));
            bonds.push((site(r, c), site((r + 1) % l, c)));
        }
    }
    Ok(LatticeGeometry {
        kind: LatticeKind::Square,
        side_length: l,
        num_sites: l * l,
        bonds: normalized(bonds),
    })
}
