use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const STANDARD: SplitRatios = SplitRatios { train: 0.70, val: 0.15, test: 0.15 };
    pub const WIDE: SplitRatios = SplitRatios { train: 0.60, val: 0.20, test: 0.20 };

    pub fn preset(name: &str) -> Option<SplitRatios> {
        match name {
            "70/15/15" | "standard" => Some(Self::STANDARD),
            "60/20/20" | "wide" => Some(Self::WIDE),
            _ => None,
        }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let r = self.as_array();
        if r.iter().any(|v| !(*v >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(EvalError::Ratios(r));
        }
        Ok(())
    }
}

/// Split sizes: floor of each quota, then leftover items one at a time to
/// the largest fractional remainders, ties going to the later split.
pub fn allocate(n: usize, ratios: &SplitRatios) -> Result<[usize; 3], EvalError> {
    ratios.validate()?;
    let quotas = ratios.as_array().map(|r| r * n as f64);
    // Round to suppress representation error in products such as 10 * 0.15.
    let quotas = quotas.map(|q| (q * 1e9).round() / 1e9);
    let mut sizes = quotas.map(|q| q.floor() as usize);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(b.cmp(&a))
    });
    let mut left = n - sizes.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    Ok(sizes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub ratios: SplitRatios,
    pub seed: u64,
}

pub const SPLIT_FILES: [&str; 3] = ["train_paths.txt", "val_paths.txt", "test_paths.txt"];

/// Recording-level split: sort, shuffle with the seed, then cut.
pub fn split_recordings(paths: &[String], ratios: &SplitRatios, seed: u64) -> Result<SplitManifest, EvalError> {
    if paths.is_empty() {
        return Err(EvalError::Empty("path list".into()));
    }
    let mut sorted = paths.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != paths.len() {
        return Err(EvalError::Duplicate);
    }
    sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [a, b, _] = allocate(sorted.len(), ratios)?;
    if sorted.len() < 3 {
        log::warn!("only {} recordings; some splits are empty", sorted.len());
    }
    let test = sorted.split_off(a + b);
    let val = sorted.split_off(a);
    Ok(SplitManifest { train: sorted, val, test, ratios: *ratios, seed })
}

impl SplitManifest {
    pub fn lists(&self) -> [&Vec<String>; 3] {
        [&self.train, &self.val, &self.test]
    }

    /// Writes the three path lists plus `split_manifest.json`.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, list) in SPLIT_FILES.iter().zip(self.lists()) {
            let mut text = list.join("\n");
            if !text.is_empty() {
                text.push('\n');
            }
            crate::pipeline::write_atomic(&dir.join(name), text.as_bytes())?;
        }
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        crate::pipeline::write_atomic(&dir.join("split_manifest.json"), json.as_bytes())
    }

    pub fn read_list(path: &Path) -> std::io::Result<Vec<String>> {
        Ok(std::fs::read_to_string(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paths(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("rec{i:03}.edf")).collect()
    }

    #[test]
    fn ten_paths() {
        assert_eq!(allocate(10, &SplitRatios::STANDARD).unwrap(), [7, 1, 2]);
        assert_eq!(allocate(10, &SplitRatios::WIDE).unwrap(), [6, 2, 2]);
        let m = split_recordings(&paths(10), &SplitRatios::STANDARD, 7).unwrap();
        assert_eq!((m.train.len(), m.val.len(), m.test.len()), (7, 1, 2));
    }

    #[test]
    fn single_path() {
        let m = split_recordings(&paths(1), &SplitRatios::STANDARD, 0).unwrap();
        assert_eq!((m.train.len(), m.val.len(), m.test.len()), (1, 0, 0));
    }

    #[test]
    fn bad_ratios() {
        let r = SplitRatios { train: 0.5, val: 0.2, test: 0.2 };
        assert!(matches!(split_recordings(&paths(5), &r, 0), Err(EvalError::Ratios(_))));
    }

    #[test]
    fn seeded() {
        let a = split_recordings(&paths(50), &SplitRatios::STANDARD, 3).unwrap();
        let b = split_recordings(&paths(50), &SplitRatios::STANDARD, 3).unwrap();
        let c = split_recordings(&paths(50), &SplitRatios::STANDARD, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train, c.train);
        // Input order does not matter.
        let mut rev = paths(50);
        rev.reverse();
        assert_eq!(split_recordings(&rev, &SplitRatios::STANDARD, 3).unwrap(), a);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = split_recordings(&paths(20), &SplitRatios::WIDE, 1).unwrap();
        m.write_dir(dir.path()).unwrap();
        for (name, list) in SPLIT_FILES.iter().zip(m.lists()) {
            assert_eq!(&SplitManifest::read_list(&dir.path().join(name)).unwrap(), list);
        }
    }

    proptest! {
        #[test]
        fn disjoint_and_complete(n in 1usize..300, seed in any::<u64>()) {
            let p = paths(n);
            let m = split_recordings(&p, &SplitRatios::STANDARD, seed).unwrap();
            let mut all: Vec<String> = m.lists().into_iter().flatten().cloned().collect();
            prop_assert_eq!(all.len(), n);
            all.sort();
            prop_assert_eq!(all, p);
            let [a, b, c] = allocate(n, &SplitRatios::STANDARD).unwrap();
            prop_assert!((a as f64 - 0.7 * n as f64).abs() < 1.0 + 1e-9);
            prop_assert!((b as f64 - 0.15 * n as f64).abs() < 1.0 + 1e-9);
            prop_assert!((c as f64 - 0.15 * n as f64).abs() < 1.0 + 1e-9);
        }
    }
}
