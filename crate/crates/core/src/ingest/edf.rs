//! EDF (European Data Format) decoding.
//!
//! Layout: a 256-byte fixed-width ASCII global header, then 256 bytes of
//! per-channel header fields (stored field-major: all labels, then all
//! transducers, ...), then `n_data_records` records each holding
//! `samples_per_record` 16-bit little-endian samples per channel.

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use thiserror::Error;

pub const GLOBAL_HEADER_LEN: usize = 256;
pub const CHANNEL_HEADER_LEN: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum EdfError {
    #[error("truncated EDF: need {needed} bytes at offset {offset}, file has {available}")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("invalid EDF header field '{field}' at byte {offset}: {text:?}")]
    InvalidField {
        field: &'static str,
        offset: usize,
        text: String,
    },
    #[error(
        "EDF channel count mismatch at byte {offset}: header length {header_bytes} implies {implied} channels, header declares {declared}"
    )]
    ChannelCountMismatch {
        offset: usize,
        header_bytes: usize,
        implied: usize,
        declared: usize,
    },
    #[error("EDF channel {channel} has invalid calibration: {reason}")]
    InvalidCalibration { channel: usize, reason: String },
}

/// Per-channel header entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfChannel {
    pub label: String,
    pub transducer: String,
    pub physical_dim: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
    pub reserved: String,
}

impl EdfChannel {
    /// Affine map from a stored digital value to physical units.
    pub fn to_physical(&self, digital: i16) -> f64 {
        let gain = (self.physical_max - self.physical_min)
            / (self.digital_max as f64 - self.digital_min as f64);
        self.physical_min + (digital as f64 - self.digital_min as f64) * gain
    }

    /// Nominal sampling rate given the record duration.
    pub fn sampling_rate(&self, record_duration: f64) -> f64 {
        self.samples_per_record as f64 / record_duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start: NaiveDateTime,
    pub reserved: String,
    pub n_data_records: usize,
    pub record_duration: f64,
    pub channels: Vec<EdfChannel>,
}

impl EdfHeader {
    pub fn header_len(&self) -> usize {
        GLOBAL_HEADER_LEN * (1 + self.channels.len())
    }

    /// Bytes per data record across all channels.
    pub fn record_len(&self) -> usize {
        self.channels.iter().map(|c| c.samples_per_record * 2).sum()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.n_data_records as f64 * self.record_duration
    }

    pub fn labels(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.label.clone()).collect()
    }

    /// Encode back into the fixed-width ASCII header.
    pub fn to_bytes(&self) -> Vec<u8> {
        let ns = self.channels.len();
        let mut out = Vec::with_capacity(self.header_len());
        put(&mut out, &self.version, 8);
        put(&mut out, &self.patient_id, 80);
        put(&mut out, &self.recording_id, 80);
        put(&mut out, &self.start.format("%d.%m.%y").to_string(), 8);
        put(&mut out, &self.start.format("%H.%M.%S").to_string(), 8);
        put(&mut out, &self.header_len().to_string(), 8);
        put(&mut out, &self.reserved, 44);
        put(&mut out, &self.n_data_records.to_string(), 8);
        put(&mut out, &format_number(self.record_duration, 8), 8);
        put(&mut out, &ns.to_string(), 4);
        let fields: [(usize, &dyn Fn(&EdfChannel) -> String); 10] = [
            (16, &|c| c.label.clone()),
            (80, &|c| c.transducer.clone()),
            (8, &|c| c.physical_dim.clone()),
            (8, &|c| format_number(c.physical_min, 8)),
            (8, &|c| format_number(c.physical_max, 8)),
            (8, &|c| c.digital_min.to_string()),
            (8, &|c| c.digital_max.to_string()),
            (80, &|c| c.prefiltering.clone()),
            (8, &|c| c.samples_per_record.to_string()),
            (32, &|c| c.reserved.clone()),
        ];
        for (width, get) in fields {
            for c in &self.channels {
                put(&mut out, &get(c), width);
            }
        }
        out
    }
}

/// A decoded file: header plus per-channel digital samples (all records
/// concatenated).
#[derive(Debug, Clone)]
pub struct EdfFile {
    pub header: EdfHeader,
    pub digital: Vec<Vec<i16>>,
}

impl EdfFile {
    pub fn physical(&self, channel: usize) -> Vec<f64> {
        let ch = &self.header.channels[channel];
        self.digital[channel].iter().map(|&d| ch.to_physical(d)).collect()
    }

    /// Serialise header and samples. Only used to build fixtures.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header.to_bytes();
        for r in 0..self.header.n_data_records {
            for (ch, samples) in self.header.channels.iter().zip(&self.digital) {
                let n = ch.samples_per_record;
                for &s in &samples[r * n..(r + 1) * n] {
                    out.extend_from_slice(&s.to_le_bytes());
                }
            }
        }
        out
    }
}

fn put(out: &mut Vec<u8>, text: &str, width: usize) {
    let bytes: Vec<u8> = text
        .bytes()
        .map(|b| if b.is_ascii() && !b.is_ascii_control() { b } else { b'?' })
        .take(width)
        .collect();
    out.extend_from_slice(&bytes);
    out.extend(std::iter::repeat_n(b' ', width - bytes.len()));
}

/// Shortest decimal rendering that fits in `width` characters.
fn format_number(v: f64, width: usize) -> String {
    let s = format!("{v}");
    if s.len() <= width {
        return s;
    }
    for prec in (0..width).rev() {
        let s = format!("{v:.prec$}");
        if s.len() <= width {
            return s;
        }
    }
    format!("{v:e}")
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, width: usize) -> Result<(usize, &'a str), EdfError> {
        let offset = self.pos;
        if offset + width > self.bytes.len() {
            return Err(EdfError::Truncated {
                offset,
                needed: width,
                available: self.bytes.len(),
            });
        }
        self.pos += width;
        let raw = &self.bytes[offset..offset + width];
        // Non-ASCII bytes do occur in the free-text fields of real files.
        let text = std::str::from_utf8(raw).unwrap_or("");
        Ok((offset, text))
    }

    fn text(&mut self, width: usize) -> Result<String, EdfError> {
        let offset = self.pos;
        self.take(width)?;
        Ok(String::from_utf8_lossy(&self.bytes[offset..offset + width])
            .trim_end()
            .to_string())
    }

    fn number<T: std::str::FromStr>(
        &mut self,
        width: usize,
        field: &'static str,
    ) -> Result<T, EdfError> {
        let (offset, text) = self.take(width)?;
        text.trim().parse::<T>().map_err(|_| EdfError::InvalidField {
            field,
            offset,
            text: text.to_string(),
        })
    }
}

fn parse_start(date: &str, time: &str, offset: usize) -> Result<NaiveDateTime, EdfError> {
    let bad = |field: &'static str, off: usize, t: &str| EdfError::InvalidField {
        field,
        offset: off,
        text: t.to_string(),
    };
    let parts = |s: &str| -> Option<[u32; 3]> {
        let v: Vec<u32> = s
            .trim()
            .split(['.', ':'])
            .map(|p| p.parse().ok())
            .collect::<Option<_>>()?;
        v.try_into().ok()
    };
    let [d, m, y] = parts(date).ok_or_else(|| bad("startdate", offset, date))?;
    // EDF clipping date: two-digit years 85..99 are 1985..1999.
    let year = if y >= 85 { 1900 + y } else { 2000 + y };
    let date_v = NaiveDate::from_ymd_opt(year as i32, m, d)
        .ok_or_else(|| bad("startdate", offset, date))?;
    let [h, mi, s] = parts(time).ok_or_else(|| bad("starttime", offset + 8, time))?;
    let time_v =
        NaiveTime::from_hms_opt(h, mi, s).ok_or_else(|| bad("starttime", offset + 8, time))?;
    Ok(NaiveDateTime::new(date_v, time_v))
}

/// Decode the header only.
pub fn parse_header(bytes: &[u8]) -> Result<EdfHeader, EdfError> {
    let mut c = Cursor { bytes, pos: 0 };
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(EdfError::Truncated {
            offset: 0,
            needed: GLOBAL_HEADER_LEN,
            available: bytes.len(),
        });
    }
    let version = c.text(8)?;
    let patient_id = c.text(80)?;
    let recording_id = c.text(80)?;
    let date_offset = c.pos;
    let (_, date) = c.take(8)?;
    let (_, time) = c.take(8)?;
    let start = parse_start(date, time, date_offset)?;
    let header_offset = c.pos;
    let header_bytes: usize = c.number(8, "header bytes")?;
    let reserved = c.text(44)?;
    let records_offset = c.pos;
    let n_records: i64 = c.number(8, "number of data records")?;
    let duration_offset = c.pos;
    let record_duration: f64 = c.number(8, "record duration")?;
    if !(record_duration > 0.0) {
        return Err(EdfError::InvalidField {
            field: "record duration",
            offset: duration_offset,
            text: record_duration.to_string(),
        });
    }
    let ns_offset = c.pos;
    let ns: usize = c.number(4, "number of signals")?;

    if header_bytes % GLOBAL_HEADER_LEN != 0 || header_bytes / GLOBAL_HEADER_LEN != ns + 1 {
        return Err(EdfError::ChannelCountMismatch {
            offset: header_offset,
            header_bytes,
            implied: (header_bytes / GLOBAL_HEADER_LEN).saturating_sub(1),
            declared: ns,
        });
    }
    let needed = GLOBAL_HEADER_LEN * (ns + 1);
    if bytes.len() < needed {
        return Err(EdfError::Truncated {
            offset: bytes.len(),
            needed,
            available: bytes.len(),
        });
    }
    let _ = ns_offset;

    let mut labels = Vec::with_capacity(ns);
    for _ in 0..ns {
        labels.push(c.text(16)?.trim().to_string());
    }
    let mut transducers = Vec::with_capacity(ns);
    for _ in 0..ns {
        transducers.push(c.text(80)?);
    }
    let mut dims = Vec::with_capacity(ns);
    for _ in 0..ns {
        dims.push(c.text(8)?.trim().to_string());
    }
    let mut pmin = Vec::with_capacity(ns);
    for _ in 0..ns {
        pmin.push(c.number::<f64>(8, "physical minimum")?);
    }
    let mut pmax = Vec::with_capacity(ns);
    for _ in 0..ns {
        pmax.push(c.number::<f64>(8, "physical maximum")?);
    }
    let mut dmin = Vec::with_capacity(ns);
    for _ in 0..ns {
        dmin.push(c.number::<i32>(8, "digital minimum")?);
    }
    let mut dmax = Vec::with_capacity(ns);
    for _ in 0..ns {
        dmax.push(c.number::<i32>(8, "digital maximum")?);
    }
    let mut prefilter = Vec::with_capacity(ns);
    for _ in 0..ns {
        prefilter.push(c.text(80)?);
    }
    let mut spr = Vec::with_capacity(ns);
    for _ in 0..ns {
        let off = c.pos;
        let n: usize = c.number(8, "samples per record")?;
        if n == 0 {
            return Err(EdfError::InvalidField {
                field: "samples per record",
                offset: off,
                text: "0".into(),
            });
        }
        spr.push(n);
    }
    let mut reserved_ch = Vec::with_capacity(ns);
    for _ in 0..ns {
        reserved_ch.push(c.text(32)?);
    }

    let mut channels = Vec::with_capacity(ns);
    for i in 0..ns {
        if !(pmax[i] > pmin[i]) {
            return Err(EdfError::InvalidCalibration {
                channel: i,
                reason: format!("physical max {} <= physical min {}", pmax[i], pmin[i]),
            });
        }
        if dmax[i] <= dmin[i] {
            return Err(EdfError::InvalidCalibration {
                channel: i,
                reason: format!("digital max {} <= digital min {}", dmax[i], dmin[i]),
            });
        }
        channels.push(EdfChannel {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dim: dims[i].clone(),
            physical_min: pmin[i],
            physical_max: pmax[i],
            digital_min: dmin[i],
            digital_max: dmax[i],
            prefiltering: prefilter[i].clone(),
            samples_per_record: spr[i],
            reserved: reserved_ch[i].clone(),
        });
    }

    let record_len: usize = spr.iter().map(|n| n * 2).sum();
    let n_data_records = if n_records < 0 {
        // -1 means "unknown"; infer from the payload size.
        (bytes.len() - needed) / record_len.max(1)
    } else {
        n_records as usize
    };
    let _ = records_offset;

    Ok(EdfHeader {
        version,
        patient_id,
        recording_id,
        start,
        reserved,
        n_data_records,
        record_duration,
        channels,
    })
}

/// Decode a complete EDF byte stream into its header and per-channel
/// digital samples.
pub fn parse_edf(bytes: &[u8]) -> Result<EdfFile, EdfError> {
    let header = parse_header(bytes)?;
    let start = header.header_len();
    let record_len = header.record_len();
    let needed = start + header.n_data_records * record_len;
    if bytes.len() < needed {
        return Err(EdfError::Truncated {
            offset: bytes.len(),
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        log::warn!(
            "EDF has {} trailing bytes after the last data record",
            bytes.len() - needed
        );
    }
    let mut digital: Vec<Vec<i16>> = header
        .channels
        .iter()
        .map(|c| Vec::with_capacity(c.samples_per_record * header.n_data_records))
        .collect();
    let mut pos = start;
    for _ in 0..header.n_data_records {
        for (ch, out) in header.channels.iter().zip(digital.iter_mut()) {
            let n = ch.samples_per_record;
            out.extend(
                bytes[pos..pos + 2 * n]
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]])),
            );
            pos += 2 * n;
        }
    }
    Ok(EdfFile { header, digital })
}
