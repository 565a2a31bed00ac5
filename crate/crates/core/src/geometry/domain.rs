use crate::error::{Error, Result};
use crate::geometry::mesh::Point;
use crate::geometry::profile::RoughProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    RoughFull,
    UnitSquare,
    Sublayer,
    CellTruncated,
    QuarterPlaneIn,
    QuarterPlaneOut,
}

/// Which lateral end of the rough channel a vertical corrector lives at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    In,
    Out,
}

impl Side {
    pub fn parse(text: &str) -> Result<Side> {
        match text.trim() {
            "in" | "In" => Ok(Side::In),
            "out" | "Out" => Ok(Side::Out),
            other => Err(Error::Parse(format!("unknown side `{other}` (expected in|out)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::In => "in",
            Side::Out => "out",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub epsilon: Option<f64>,
    pub truncation_l: Option<f64>,
    pub profile: RoughProfile,
}

impl DomainSpec {
    pub fn rough(profile: RoughProfile, epsilon: f64) -> Self {
        Self { kind: DomainKind::RoughFull, epsilon: Some(epsilon), truncation_l: None, profile }
    }

    pub fn unit_square() -> Self {
        Self {
            kind: DomainKind::UnitSquare,
            epsilon: None,
            truncation_l: None,
            profile: RoughProfile::constant(0.0),
        }
    }

    pub fn sublayer(profile: RoughProfile, epsilon: f64) -> Self {
        Self { kind: DomainKind::Sublayer, epsilon: Some(epsilon), truncation_l: None, profile }
    }

    pub fn cell(profile: RoughProfile, l: f64) -> Self {
        Self { kind: DomainKind::CellTruncated, epsilon: None, truncation_l: Some(l), profile }
    }

    pub fn quarter_plane(side: Side, profile: RoughProfile, l: f64) -> Self {
        let kind = match side {
            Side::In => DomainKind::QuarterPlaneIn,
            Side::Out => DomainKind::QuarterPlaneOut,
        };
        Self { kind, epsilon: None, truncation_l: Some(l), profile }
    }

    pub fn epsilon(&self) -> Result<f64> {
        self.epsilon
            .ok_or_else(|| Error::InvalidInput(format!("{:?} domain needs an epsilon", self.kind)))
    }

    pub fn truncation(&self) -> Result<f64> {
        self.truncation_l
            .ok_or_else(|| Error::InvalidInput(format!("{:?} domain needs a truncation length", self.kind)))
    }

    /// Height of the top of the rough sub-layer, `ε/10`.
    pub fn sublayer_top(&self) -> Result<f64> {
        Ok(self.epsilon()? / 10.0)
    }

    /// The singular corner `(1, ε f(1/ε))` of the rough channel.
    pub fn outlet_corner(&self) -> Result<Point> {
        let eps = self.epsilon()?;
        Ok([1.0, eps * self.profile.eval(1.0 / eps)])
    }

    pub fn validate(&self) -> Result<()> {
        use DomainKind::*;
        match self.kind {
            RoughFull | Sublayer => {
                let eps = self.epsilon()?;
                if !(eps > 0.0 && eps <= 1.0) {
                    return Err(Error::InvalidInput(format!("epsilon {eps} outside (0, 1]")));
                }
                self.profile.validate()?;
            }
            CellTruncated | QuarterPlaneIn | QuarterPlaneOut => {
                let l = self.truncation()?;
                if !(l >= 2.0) {
                    return Err(Error::InvalidInput(format!("truncation length {l} below 2")));
                }
                self.profile.validate()?;
            }
            UnitSquare => {}
        }
        Ok(())
    }
}
