//! Line-oriented beat annotation files:
//!
//! ```text
//! # comment
//! 0.512 N
//! 1.304 V
//! episode AF 120.0 480.5
//! ```

use std::fmt::Write as _;

use super::ectopy::{Beat, BeatAnnotations, BeatLabel, Episode, EpisodeKind};
use super::HolterError;

pub fn parse_beat_annotations(text: &str) -> Result<BeatAnnotations, HolterError> {
    let mut out = BeatAnnotations::default();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| HolterError::Parse { line: no + 1, reason: what.to_string() };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0].eq_ignore_ascii_case("episode") {
            let [_, kind, start, end] = fields[..] else {
                return Err(bad("expected `episode KIND START END`"));
            };
            let kind = EpisodeKind::parse(kind).ok_or_else(|| bad("unknown episode kind"))?;
            let start: f64 = start.parse().map_err(|_| bad("bad start time"))?;
            let end: f64 = end.parse().map_err(|_| bad("bad end time"))?;
            out.episodes.push(Episode { kind, start, end });
        } else {
            let [time, label] = fields[..] else {
                return Err(bad("expected `TIME LABEL`"));
            };
            let time: f64 = time.parse().map_err(|_| bad("bad beat time"))?;
            if !time.is_finite() {
                return Err(bad("non-finite beat time"));
            }
            out.beats.push(Beat { time, label: BeatLabel::parse(label) });
        }
    }
    out.validate(None)?;
    Ok(out)
}

pub fn write_beat_annotations(ann: &BeatAnnotations) -> String {
    let mut s = String::new();
    for b in &ann.beats {
        let _ = writeln!(s, "{:.3} {}", b.time, b.label.code());
    }
    for e in &ann.episodes {
        let kind = match e.kind {
            EpisodeKind::Af => "AF",
            EpisodeKind::Vt => "VT",
            EpisodeKind::Svt => "SVT",
        };
        let _ = writeln!(s, "episode {kind} {:.3} {:.3}", e.start, e.end);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "# beats\n0.500 N\n1.300 V\n2.100 S\n\nepisode AF 10.000 70.500\n";
        let ann = parse_beat_annotations(text).unwrap();
        assert_eq!(ann.beats.len(), 3);
        assert_eq!(ann.beats[1].label, BeatLabel::Pvc);
        assert_eq!(ann.episodes[0].kind, EpisodeKind::Af);
        assert_eq!(parse_beat_annotations(&write_beat_annotations(&ann)).unwrap(), ann);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_beat_annotations("1.0\n"), Err(HolterError::Parse { line: 1, .. })));
        assert!(matches!(parse_beat_annotations("2.0 N\n1.0 N\n"), Err(HolterError::Unsorted)));
        assert!(parse_beat_annotations("episode AF 5 4\n").is_err());
        assert!(parse_beat_annotations("episode XX 1 4\n").is_err());
    }
}
