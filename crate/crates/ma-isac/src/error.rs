use std::fmt;

/// Which sensing quality-of-service constraint a report refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BoundKind {
    Theta,
    Distance,
    Speed,
}

impl BoundKind {
    pub const ALL: [BoundKind; 3] = [BoundKind::Theta, BoundKind::Distance, BoundKind::Speed];

    pub fn index(self) -> usize {
        match self {
            BoundKind::Theta => 0,
            BoundKind::Distance => 1,
            BoundKind::Speed => 2,
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundKind::Theta => "theta",
            BoundKind::Distance => "distance",
            BoundKind::Speed => "speed",
        };
        f.write_str(s)
    }
}

/// The constraint with the smallest normalized margin `threshold·information − 1`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Infeasibility {
    pub vehicle: usize,
    pub kind: BoundKind,
    pub margin: f64,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tightest constraint: vehicle {} {} bound (normalized margin {:.3e})",
            self.vehicle, self.kind, self.margin
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("ill-conditioned matrix in {context} (relative pivot {pivot:.3e})")]
    Conditioning { context: String, pivot: f64 },
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("information block not positive definite for vehicle {0}")]
    NonPdBound(usize),
    #[error("infeasible: {0}")]
    Infeasible(Infeasibility),
    #[error("no feasible particle found by the swarm")]
    SwarmInfeasible,
    #[error("slot {slot}: {source}")]
    Slot {
        slot: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_slot(self, slot: usize) -> Error {
        Error::Slot { slot, source: Box::new(self) }
    }

    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Digs through slot/stage wrappers for an infeasibility report.
    pub fn infeasibility(&self) -> Option<Infeasibility> {
        match self {
            Error::Infeasible(r) => Some(*r),
            Error::Slot { source, .. } | Error::Stage { source, .. } => source.infeasibility(),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
