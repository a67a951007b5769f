use serde::{Deserialize, Serialize};

use super::{ModelError, ProbabilityMatrix};
use crate::Stage;

/// Number of stage classes after merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Granularity {
    Five,
    Four,
    Three,
    Two,
}

impl TryFrom<u8> for Granularity {
    type Error = ModelError;
    fn try_from(k: u8) -> Result<Self, ModelError> {
        match k {
            5 => Ok(Granularity::Five),
            4 => Ok(Granularity::Four),
            3 => Ok(Granularity::Three),
            2 => Ok(Granularity::Two),
            _ => Err(ModelError::InvalidGranularity(k)),
        }
    }
}

impl From<Granularity> for u8 {
    fn from(g: Granularity) -> u8 {
        g.n_classes() as u8
    }
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [Granularity::Five, Granularity::Four, Granularity::Three, Granularity::Two];

    pub fn n_classes(self) -> usize {
        match self {
            Granularity::Five => 5,
            Granularity::Four => 4,
            Granularity::Three => 3,
            Granularity::Two => 2,
        }
    }

    /// Collapsed class of a five-class stage.
    pub fn group(self, stage: Stage) -> usize {
        use Stage::*;
        match (self, stage) {
            (Granularity::Five, s) => s.index(),
            (Granularity::Four, W) => 0,
            (Granularity::Four, N1 | N2) => 1,
            (Granularity::Four, N3) => 2,
            (Granularity::Four, Rem) => 3,
            (Granularity::Three, W) => 0,
            (Granularity::Three, N1 | N2 | N3) => 1,
            (Granularity::Three, Rem) => 2,
            (Granularity::Two, W) => 0,
            (Granularity::Two, _) => 1,
        }
    }

    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            Granularity::Five => &["W", "N1", "N2", "N3", "REM"],
            Granularity::Four => &["W", "Light", "Deep", "REM"],
            Granularity::Three => &["W", "NREM", "REM"],
            Granularity::Two => &["W", "Sleep"],
        }
    }
}

/// Sum the probabilities of merged classes.
pub fn collapse_classes(p: &ProbabilityMatrix, g: Granularity) -> Result<ProbabilityMatrix, ModelError> {
    if p.n_classes() != 5 {
        return Err(ModelError::Shape(format!("expected 5 classes, got {}", p.n_classes())));
    }
    let k = g.n_classes();
    let mut data = Vec::with_capacity(p.n_rows() * k);
    for r in p.rows() {
        let mut out = vec![0.0; k];
        for s in Stage::ALL {
            out[g.group(s)] += r[s.index()];
        }
        data.extend(out);
    }
    ProbabilityMatrix::new(k, data)
}

pub fn collapse_labels(labels: &[Stage], g: Granularity) -> Vec<usize> {
    labels.iter().map(|&s| g.group(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(v: [f64; 5]) -> ProbabilityMatrix {
        ProbabilityMatrix::new(5, v.to_vec()).unwrap()
    }

    #[test]
    fn examples() {
        let p = row([0.1, 0.2, 0.3, 0.2, 0.2]);
        let four = collapse_classes(&p, Granularity::Four).unwrap();
        for (a, b) in four.row(0).iter().zip([0.1, 0.5, 0.2, 0.2]) {
            assert!((a - b).abs() < 1e-12);
        }
        let two = collapse_classes(&p, Granularity::Two).unwrap();
        assert!((two.row(0)[0] - 0.1).abs() < 1e-12 && (two.row(0)[1] - 0.9).abs() < 1e-12);
        assert!(matches!(Granularity::try_from(6), Err(ModelError::InvalidGranularity(6))));
    }

    #[test]
    fn label_partitions() {
        use Stage::*;
        let labels = [W, N1, N2, N3, Rem];
        assert_eq!(collapse_labels(&labels, Granularity::Four), vec![0, 1, 1, 2, 3]);
        assert_eq!(collapse_labels(&labels, Granularity::Three), vec![0, 1, 1, 1, 2]);
        assert_eq!(collapse_labels(&labels, Granularity::Two), vec![0, 1, 1, 1, 1]);
        assert_eq!(collapse_labels(&labels, Granularity::Five), vec![0, 1, 2, 3, 4]);
    }

    proptest! {
        #[test]
        fn mass_preserved(raw in prop::collection::vec(0.0f64..1.0, 5)) {
            let s: f64 = raw.iter().sum();
            prop_assume!(s > 1e-6);
            let v: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let p = ProbabilityMatrix::new(5, v).unwrap();
            for g in Granularity::ALL {
                let c = collapse_classes(&p, g).unwrap();
                prop_assert!((c.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
