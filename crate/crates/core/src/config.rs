//! Singular points of T^4/Z_2, gluing data and configuration documents.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::{rho, Mat4, Orientation, Vec3, Vec4};
use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Half-lattice point with label eps in {0,1}^4, ordered lexicographically in eps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SingularPoint(u8);

impl SingularPoint {
    pub fn new(eps: [u8; 4]) -> Result<Self> {
        if eps.iter().any(|&e| e > 1) {
            return Err(Error::InvalidArgument(format!("eps entries must be 0 or 1, got {eps:?}")));
        }
        Ok(SingularPoint(eps[0] << 3 | eps[1] << 2 | eps[2] << 1 | eps[3]))
    }

    pub fn from_index(index: usize) -> Result<Self> {
        if index >= 16 {
            return Err(Error::InvalidArgument(format!("singular point index {index} out of range")));
        }
        Ok(SingularPoint(index as u8))
    }

    pub fn origin() -> Self {
        SingularPoint(0)
    }

    /// e_k for k in 1..=4.
    pub fn unit(k: usize) -> Result<Self> {
        if !(1..=4).contains(&k) {
            return Err(Error::InvalidArgument(format!("unit index {k} out of range")));
        }
        Ok(SingularPoint(1 << (4 - k)))
    }

    pub fn all() -> impl Iterator<Item = SingularPoint> {
        (0..16u8).map(SingularPoint)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn eps(self) -> [u8; 4] {
        [self.0 >> 3 & 1, self.0 >> 2 & 1, self.0 >> 1 & 1, self.0 & 1]
    }

    pub fn position(self) -> Vec4 {
        let e = self.eps();
        Vec4::new(e[0] as f64, e[1] as f64, e[2] as f64, e[3] as f64)
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }

    /// Orientation assigned by the chessboard pattern: odd weight is positive.
    pub fn chessboard_orientation(self) -> Orientation {
        if self.weight() % 2 == 1 {
            Orientation::Positive
        } else {
            Orientation::Negative
        }
    }

    pub fn opposite(self) -> Self {
        SingularPoint(self.0 ^ 0b1111)
    }

    /// Class of p - q modulo 2Z^4, as a 4-bit code.
    pub fn difference_class(self, other: SingularPoint) -> u8 {
        self.0 ^ other.0
    }

    pub fn translate(self, other: SingularPoint) -> SingularPoint {
        SingularPoint(self.0 ^ other.0)
    }

    pub fn label(self) -> String {
        let e = self.eps();
        format!("({},{},{},{})", e[0], e[1], e[2], e[3])
    }
}

impl fmt::Display for SingularPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn class_offset(class: u8) -> Vec4 {
    SingularPoint(class & 0b1111).position()
}

pub fn opposite_point(p: SingularPoint) -> SingularPoint {
    p.opposite()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GluingDatum {
    pub orientation: Orientation,
    pub zeta: Vec3,
}

impl GluingDatum {
    pub fn new(orientation: Orientation, zeta: Vec3) -> Result<Self> {
        if zeta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("zeta".into()));
        }
        if zeta.norm() == 0.0 {
            return Err(Error::ZeroVector("gluing parameter zeta"));
        }
        Ok(GluingDatum { orientation, zeta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    FirstOrder,
    Full,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::FirstOrder => "first-order",
            Suite::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "first-order" => Some(Suite::FirstOrder),
            "full" => Some(Suite::Full),
            _ => None,
        }
    }

    pub fn per_point(self) -> usize {
        match self {
            Suite::FirstOrder => 3,
            Suite::Full => 5,
        }
    }

    pub fn dk_count(self) -> usize {
        match self {
            Suite::FirstOrder => 9,
            Suite::Full => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    lattice: Lattice,
    gluing: [Option<GluingDatum>; 16],
}

impl Configuration {
    pub fn new(lattice: Lattice, gluing: [Option<GluingDatum>; 16]) -> Result<Self> {
        for d in gluing.iter().flatten() {
            GluingDatum::new(d.orientation, d.zeta)?;
        }
        Ok(Configuration { lattice, gluing })
    }

    pub fn from_points(lattice: Lattice, points: impl IntoIterator<Item = (SingularPoint, GluingDatum)>) -> Result<Self> {
        let mut gluing = [None; 16];
        for (p, d) in points {
            if gluing[p.index()].is_some() {
                return Err(Error::InvalidArgument(format!("duplicate gluing datum at {p}")));
            }
            gluing[p.index()] = Some(d);
        }
        Self::new(lattice, gluing)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn datum(&self, p: SingularPoint) -> Option<&GluingDatum> {
        self.gluing[p.index()].as_ref()
    }

    pub fn require(&self, p: SingularPoint) -> Result<&GluingDatum> {
        self.datum(p).ok_or_else(|| Error::Unglued(p.label()))
    }

    pub fn glued(&self) -> impl Iterator<Item = (SingularPoint, &GluingDatum)> {
        SingularPoint::all().filter_map(move |p| self.datum(p).map(|d| (p, d)))
    }

    pub fn is_total(&self) -> bool {
        self.gluing.iter().all(|d| d.is_some())
    }

    pub fn require_total(&self) -> Result<()> {
        match SingularPoint::all().find(|p| self.datum(*p).is_none()) {
            None => Ok(()),
            Some(p) => Err(Error::Partial(format!("point {p} is not desingularized"))),
        }
    }

    pub fn with_lattice(&self, lattice: Lattice) -> Self {
        Configuration { lattice, gluing: self.gluing }
    }

    pub fn with_zeta(&self, p: SingularPoint, zeta: Vec3) -> Result<Self> {
        let d = self.require(p)?;
        let mut gluing = self.gluing;
        gluing[p.index()] = Some(GluingDatum::new(d.orientation, zeta)?);
        Ok(Configuration { lattice: self.lattice, gluing })
    }

    pub fn map_zetas(&self, f: impl Fn(SingularPoint, &GluingDatum) -> Vec3) -> Result<Self> {
        let mut gluing = self.gluing;
        for p in SingularPoint::all() {
            if let Some(d) = self.datum(p) {
                gluing[p.index()] = Some(GluingDatum::new(d.orientation, f(p, d))?);
            }
        }
        Ok(Configuration { lattice: self.lattice, gluing })
    }

    /// All orientations swapped.
    pub fn mirrored(&self) -> Self {
        let mut gluing = self.gluing;
        for d in gluing.iter_mut().flatten() {
            d.orientation = d.orientation.opposite();
        }
        Configuration { lattice: self.lattice, gluing }
    }

    pub fn points_with(&self, orientation: Orientation) -> Vec<SingularPoint> {
        self.glued().filter(|(_, d)| d.orientation == orientation).map(|(p, _)| p).collect()
    }

    /// Mean of |zeta|^2 over glued points.
    pub fn zeta_scale(&self) -> f64 {
        let (s, n) = self.glued().fold((0.0, 0usize), |(s, n), (_, d)| (s + d.zeta.norm_squared(), n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }
}

pub fn parity_sets(config: &Configuration) -> (Vec<SingularPoint>, Vec<SingularPoint>) {
    (config.points_with(Orientation::Positive), config.points_with(Orientation::Negative))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CensusEntry {
    pub distance_squared: u32,
    pub same_parity: usize,
    pub opposite_parity: usize,
}

/// Neighbours of p on the torus at L = I, grouped by distance (which equals the
/// square root of the Hamming distance of the labels).
pub fn neighbor_census(p: SingularPoint) -> Vec<CensusEntry> {
    let mut out: Vec<CensusEntry> = (1..=4)
        .map(|d| CensusEntry { distance_squared: d, same_parity: 0, opposite_parity: 0 })
        .collect();
    for q in SingularPoint::all().filter(|q| *q != p) {
        let d = p.difference_class(q).count_ones();
        let e = &mut out[d as usize - 1];
        if q.weight() % 2 == p.weight() % 2 {
            e.same_parity += 1;
        } else {
            e.opposite_parity += 1;
        }
    }
    out
}

pub fn build_chessboard(
    lattice: &Lattice,
    zetas: &BTreeMap<SingularPoint, Vec3>,
    enforce_opposite_equality: bool,
) -> Result<Configuration> {
    let mut gluing = [None; 16];
    for p in SingularPoint::all() {
        let own = zetas.get(&p);
        let zeta = if enforce_opposite_equality {
            let other = zetas.get(&p.opposite());
            match (own, other) {
                (Some(a), Some(b)) if a != b => return Err(Error::OppositeConflict(p.label(), p.opposite().label())),
                (Some(a), _) | (None, Some(a)) => *a,
                (None, None) => return Err(Error::Unglued(p.label())),
            }
        } else {
            *own.ok_or_else(|| Error::Unglued(p.label()))?
        };
        gluing[p.index()] = Some(GluingDatum::new(p.chessboard_orientation(), zeta)?);
    }
    Configuration::new(*lattice, gluing)
}

/// Where the coefficient triples (x_k, y_k, z_k) are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyFrame {
    /// zeta at the k-th representative is (x_k, y_k, z_k).
    Literal,
    /// (x_k, y_k, z_k) is the rotated parameter rho zeta seen from the base point
    /// of the opposite orientation across the nearest lattice vector L e_k.
    Transported,
}

/// Representatives of S+ are e_1..e_4; those of S- are their translates by e_1.
pub fn chessboard_representatives() -> ([SingularPoint; 4], [SingularPoint; 4]) {
    let e: [SingularPoint; 4] = std::array::from_fn(|k| SingularPoint::unit(k + 1).expect("k in range"));
    let shift = e[0];
    (e, e.map(|p| p.translate(shift)))
}

pub fn chessboard_family(
    x: &[f64; 4],
    y: &[f64; 4],
    z: &[f64; 4],
    lattice: &Lattice,
    frame: FamilyFrame,
) -> Result<Configuration> {
    let (plus, minus) = chessboard_representatives();
    let mut zetas = BTreeMap::new();
    for k in 0..4 {
        let u = Vec3::new(x[k], y[k], z[k]);
        if u.norm() == 0.0 {
            return Err(Error::ZeroVector("family coefficient triple"));
        }
        let (zp, zm) = match frame {
            FamilyFrame::Literal => (u, u),
            FamilyFrame::Transported => {
                let dir = lattice.matrix() * SingularPoint::unit(k + 1)?.position();
                let r = rho(&dir, Orientation::Negative.induced_convention())?;
                (r.matrix().transpose() * u, r.transposed().matrix().transpose() * u)
            }
        };
        zetas.insert(plus[k], zp);
        zetas.insert(minus[k], zm);
    }
    build_chessboard(lattice, &zetas, true)
}

/// Vanishes exactly when the columns (x, y, z) are orthogonal with equal length.
pub fn family_conditions(x: &[f64; 4], y: &[f64; 4], z: &[f64; 4]) -> [f64; 6] {
    let dot = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    [dot(x, x) - dot(y, y), dot(y, y) - dot(z, z), dot(x, y), dot(x, z), dot(y, z), 0.0]
}

pub fn count_freedoms_constraints(config: &Configuration, suite: Suite) -> Result<(usize, usize)> {
    config.require_total()?;
    Ok((3 * 16 + 9, 16 * suite.per_point() + suite.dk_count()))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDocument {
    #[serde(rename = "L")]
    l: [[f64; 4]; 4],
    points: Vec<PointRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointRecord {
    eps: [u8; 4],
    orientation: Option<String>,
    zeta: Option<[f64; 3]>,
}

fn to_document(config: &Configuration) -> ConfigDocument {
    let m = config.lattice.matrix();
    ConfigDocument {
        l: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
        points: SingularPoint::all()
            .map(|p| {
                let d = config.datum(p);
                PointRecord {
                    eps: p.eps(),
                    orientation: d.map(|d| d.orientation.symbol().to_string()),
                    zeta: d.map(|d| [d.zeta[0], d.zeta[1], d.zeta[2]]),
                }
            })
            .collect(),
    }
}

fn from_document(doc: ConfigDocument) -> Result<Configuration> {
    let lattice = Lattice::new(Mat4::from_fn(|r, c| doc.l[r][c]))?;
    let mut seen: [Option<Option<GluingDatum>>; 16] = [None; 16];
    for rec in doc.points {
        let p = SingularPoint::new(rec.eps).map_err(|e| Error::Document(e.to_string()))?;
        if seen[p.index()].is_some() {
            return Err(Error::Document(format!("duplicate point {p}")));
        }
        let datum = match (rec.orientation, rec.zeta) {
            (None, None) => None,
            (Some(o), Some(z)) => {
                let orientation = Orientation::parse(&o)
                    .ok_or_else(|| Error::Document(format!("orientation at {p} must be \"+\" or \"-\", got {o:?}")))?;
                Some(GluingDatum::new(orientation, Vec3::new(z[0], z[1], z[2]))?)
            }
            _ => return Err(Error::Document(format!("point {p} needs both orientation and zeta, or neither"))),
        };
        seen[p.index()] = Some(datum);
    }
    let mut gluing = [None; 16];
    for p in SingularPoint::all() {
        match seen[p.index()] {
            Some(d) => gluing[p.index()] = d,
            None => return Err(Error::Document(format!("missing point entry {p}"))),
        }
    }
    Configuration::new(lattice, gluing)
}

pub fn config_to_string(config: &Configuration) -> Result<String> {
    Ok(serde_json::to_string_pretty(&to_document(config))?)
}

pub fn config_from_str(s: &str) -> Result<Configuration> {
    from_document(serde_json::from_str(s).map_err(|e| Error::Document(e.to_string()))?)
}

pub fn read_config(mut reader: impl Read) -> Result<Configuration> {
    let mut s = String::new();
    reader.read_to_string(&mut s)?;
    config_from_str(&s)
}

pub fn write_config(config: &Configuration, mut writer: impl Write) -> Result<()> {
    writer.write_all(config_to_string(config)?.as_bytes())?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_config_file(path: impl AsRef<Path>) -> Result<Configuration> {
    read_config(std::fs::File::open(path)?)
}

pub fn write_config_file(config: &Configuration, path: impl AsRef<Path>) -> Result<()> {
    write_config(config, std::fs::File::create(path)?)
}
