use serde::{Deserialize, Serialize};

use super::HolterError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BeatLabel {
    Normal,
    Pac,
    Pvc,
    Other,
}

impl BeatLabel {
    /// Accepts single-letter beat codes and common long forms.
    pub fn parse(s: &str) -> BeatLabel {
        match s.to_ascii_uppercase().as_str() {
            "N" | "NORMAL" | "L" | "R" => BeatLabel::Normal,
            "S" | "A" | "PAC" | "SVPB" | "SVE" => BeatLabel::Pac,
            "V" | "PVC" | "VPB" | "VE" => BeatLabel::Pvc,
            _ => BeatLabel::Other,
        }
    }

    pub fn code(self) -> char {
        match self {
            BeatLabel::Normal => 'N',
            BeatLabel::Pac => 'S',
            BeatLabel::Pvc => 'V',
            BeatLabel::Other => 'Q',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeKind {
    Af,
    Vt,
    Svt,
}

impl EpisodeKind {
    pub fn parse(s: &str) -> Option<EpisodeKind> {
        match s.to_ascii_uppercase().as_str() {
            "AF" | "AFIB" | "AFL" => Some(EpisodeKind::Af),
            "VT" => Some(EpisodeKind::Vt),
            "SVT" | "SVTA" => Some(EpisodeKind::Svt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beat {
    pub time: f64,
    pub label: BeatLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub kind: EpisodeKind,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BeatAnnotations {
    pub beats: Vec<Beat>,
    pub episodes: Vec<Episode>,
}

impl BeatAnnotations {
    pub fn from_labels(labels: &[BeatLabel], rr_s: f64) -> Self {
        BeatAnnotations {
            beats: labels.iter().enumerate().map(|(i, l)| Beat { time: i as f64 * rr_s, label: *l }).collect(),
            episodes: Vec::new(),
        }
    }

    pub fn validate(&self, duration_s: Option<f64>) -> Result<(), HolterError> {
        if self.beats.windows(2).any(|w| !(w[1].time >= w[0].time)) {
            return Err(HolterError::Unsorted);
        }
        for e in &self.episodes {
            if !(e.start < e.end) {
                return Err(HolterError::InvalidEpisode(format!("{:?} {}..{}", e.kind, e.start, e.end)));
            }
        }
        if let Some(d) = duration_s {
            if let Some(b) = self.beats.iter().find(|b| b.time < 0.0 || b.time > d) {
                return Err(HolterError::InvalidEpisode(format!("beat at {} s outside the recording", b.time)));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<BeatLabel> {
        self.beats.iter().map(|b| b.label).collect()
    }

    /// Beats with time in `[start, end)`, shifted so `start` becomes 0.
    pub fn window(&self, start: f64, end: f64) -> BeatAnnotations {
        BeatAnnotations {
            beats: self
                .beats
                .iter()
                .filter(|b| b.time >= start && b.time < end)
                .map(|b| Beat { time: b.time - start, label: b.label })
                .collect(),
            episodes: self
                .episodes
                .iter()
                .filter(|e| e.end > start && e.start < end)
                .map(|e| Episode { kind: e.kind, start: e.start.max(start) - start, end: e.end.min(end) - start })
                .collect(),
        }
    }
}

/// Pattern an ectopic beat is attributed to. Every beat of the class gets
/// exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    Single,
    Paired,
    Bigeminy,
    Triad,
    Run,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternCounts {
    pub total: usize,
    /// Isolated beats outside any bigeminy episode.
    pub single: usize,
    /// Couplets.
    pub paired: usize,
    /// Bigeminy episodes.
    pub bigeminy: usize,
    /// Runs of exactly three.
    pub triad: usize,
    /// Runs of four or more.
    pub long_runs: usize,
}

impl PatternCounts {
    /// Runs of three or more.
    pub fn tachy_runs(&self) -> usize {
        self.triad + self.long_runs
    }
}

/// Per-beat pattern attribution for one ectopic class.
pub fn attribute(labels: &[BeatLabel], class: BeatLabel) -> (Vec<Option<Pattern>>, PatternCounts) {
    let n = labels.len();
    let mut out = vec![None; n];
    let mut counts = PatternCounts { total: labels.iter().filter(|l| **l == class).count(), ..Default::default() };
    let mut singles = Vec::new();
    let mut i = 0;
    while i < n {
        if labels[i] != class {
            i += 1;
            continue;
        }
        let s = i;
        while i < n && labels[i] == class {
            i += 1;
        }
        let p = match i - s {
            1 => {
                singles.push(s);
                Pattern::Single
            }
            2 => {
                counts.paired += 1;
                Pattern::Paired
            }
            3 => {
                counts.triad += 1;
                Pattern::Triad
            }
            _ => {
                counts.long_runs += 1;
                Pattern::Run
            }
        };
        out[s..i].fill(Some(p));
    }

    // Chains of singles separated by exactly one normal beat.
    let mut k = 0;
    while k < singles.len() {
        let mut e = k;
        while e + 1 < singles.len()
            && singles[e + 1] == singles[e] + 2
            && labels[singles[e] + 1] == BeatLabel::Normal
        {
            e += 1;
        }
        if e - k + 1 >= 3 {
            counts.bigeminy += 1;
            for &b in &singles[k..=e] {
                out[b] = Some(Pattern::Bigeminy);
            }
        } else {
            counts.single += e - k + 1;
        }
        k = e + 1;
    }
    (out, counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BurdenConfig {
    pub frequent_pvc_per_hour: f64,
    pub frequent_pac_per_hour: f64,
}

impl Default for BurdenConfig {
    fn default() -> Self {
        BurdenConfig { frequent_pvc_per_hour: 21.0, frequent_pac_per_hour: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ectopy {
    pub pac: PatternCounts,
    pub pvc: PatternCounts,
    pub total_vt: usize,
    pub total_svt: usize,
    pub af_minutes: f64,
    pub pac_per_hour: f64,
    pub pvc_per_hour: f64,
    pub frequent_pac: bool,
    pub frequent_pvc: bool,
}

pub fn ectopy_burden(ann: &BeatAnnotations, duration_s: f64, cfg: &BurdenConfig) -> Result<Ectopy, HolterError> {
    ann.validate(None)?;
    if !(duration_s > 0.0) {
        return Err(HolterError::InvalidDuration(duration_s));
    }
    let labels = ann.labels();
    let (_, pvc) = attribute(&labels, BeatLabel::Pvc);
    let (_, pac) = attribute(&labels, BeatLabel::Pac);
    let episodes = |k: EpisodeKind| ann.episodes.iter().filter(move |e| e.kind == k);
    let vt_ep = episodes(EpisodeKind::Vt).count();
    let svt_ep = episodes(EpisodeKind::Svt).count();
    let hours = duration_s / 3600.0;
    let pvc_per_hour = pvc.total as f64 / hours;
    let pac_per_hour = pac.total as f64 / hours;
    Ok(Ectopy {
        total_vt: if vt_ep > 0 { vt_ep } else { pvc.tachy_runs() },
        total_svt: if svt_ep > 0 { svt_ep } else { pac.tachy_runs() },
        af_minutes: episodes(EpisodeKind::Af).map(|e| e.end - e.start).sum::<f64>() / 60.0,
        pac,
        pvc,
        pac_per_hour,
        pvc_per_hour,
        frequent_pac: pac_per_hour >= cfg.frequent_pac_per_hour,
        frequent_pvc: pvc_per_hour >= cfg.frequent_pvc_per_hour,
    })
}
