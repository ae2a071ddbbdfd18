//! MOT-style comma-separated box files:
//! `frame,id,left,top,width,height,conf,x,y,z`.
//!
//! Rows with `id = -1` are detections; all others are tracklet boxes.
//! Canonical output writes boxes with 2 decimals and confidences with 4,
//! sorted by frame then id (detections first within a frame, keeping their
//! relative order).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::entity::{Detection, Frame, TrackId, Tracklet};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

/// Parsed contents of a box file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotRecords {
    /// Ascending by frame; file order within a frame.
    pub detections: Vec<Detection>,
    /// Ascending by id.
    pub tracklets: Vec<Tracklet>,
}

impl MotRecords {
    pub fn detections_by_frame(&self) -> BTreeMap<Frame, Vec<Detection>> {
        let mut out: BTreeMap<Frame, Vec<Detection>> = BTreeMap::new();
        for d in &self.detections {
            out.entry(d.frame).or_default().push(*d);
        }
        out
    }
}

fn field<T: std::str::FromStr>(cols: &[&str], i: usize, name: &str, line: usize) -> Result<T, ParseError> {
    cols[i].trim().parse().map_err(|_| ParseError {
        line,
        msg: format!("invalid {name} {:?}", cols[i].trim()),
    })
}

fn finite(v: f64, name: &str, line: usize) -> Result<f64, ParseError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ParseError {
            line,
            msg: format!("{name} is not finite"),
        })
    }
}

pub fn parse_mot(text: &str) -> Result<MotRecords, ParseError> {
    let mut detections: Vec<Detection> = Vec::new();
    let mut boxes: BTreeMap<TrackId, BTreeMap<Frame, BoundingBox>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split(',').collect();
        if !(7..=10).contains(&cols.len()) {
            return Err(ParseError {
                line,
                msg: format!("expected 7 to 10 columns, found {}", cols.len()),
            });
        }
        let frame: Frame = field(&cols, 0, "frame", line)?;
        if frame == 0 {
            return Err(ParseError {
                line,
                msg: "frames start at 1".into(),
            });
        }
        let id: i64 = field(&cols, 1, "id", line)?;
        let mut v = [0.0; 5];
        for (k, name) in ["left", "top", "width", "height", "confidence"].iter().enumerate() {
            v[k] = finite(field(&cols, k + 2, name, line)?, name, line)?;
        }
        for k in 7..cols.len() {
            finite(field(&cols, k, "placeholder", line)?, "placeholder", line)?;
        }
        let bbox = BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| ParseError {
            line,
            msg: e.to_string(),
        })?;
        match id {
            -1 => detections.push(Detection::new(frame, bbox, v[4])),
            id if id >= 0 => {
                if boxes.entry(id as TrackId).or_default().insert(frame, bbox).is_some() {
                    return Err(ParseError {
                        line,
                        msg: format!("id {id} appears twice in frame {frame}"),
                    });
                }
            }
            _ => {
                return Err(ParseError {
                    line,
                    msg: format!("invalid id {id}"),
                })
            }
        }
    }
    detections.sort_by_key(|d| d.frame);
    let tracklets = boxes
        .into_iter()
        .map(|(id, p)| Tracklet::with_positions(id, p))
        .collect();
    Ok(MotRecords { detections, tracklets })
}

fn push_line(out: &mut String, frame: Frame, id: i64, b: &BoundingBox, conf: f64) {
    let _ = writeln!(
        out,
        "{frame},{id},{:.2},{:.2},{:.2},{:.2},{conf:.4},-1,-1,-1",
        b.x, b.y, b.w, b.h
    );
}

pub fn write_records(records: &MotRecords) -> String {
    let mut rows: Vec<(Frame, i64, usize, BoundingBox, f64)> = Vec::new();
    for (i, d) in records.detections.iter().enumerate() {
        rows.push((d.frame, -1, i, d.bbox, d.confidence));
    }
    for t in &records.tracklets {
        for (&f, b) in &t.positions {
            rows.push((f, t.id as i64, 0, *b, 1.0));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1, r.2));
    let mut out = String::new();
    for (f, id, _, b, c) in rows {
        push_line(&mut out, f, id, &b, c);
    }
    out
}

pub fn write_detections(dets: &[Detection]) -> String {
    write_records(&MotRecords {
        detections: dets.to_vec(),
        tracklets: Vec::new(),
    })
}

pub fn write_tracklets(tracks: &[Tracklet]) -> String {
    write_records(&MotRecords {
        detections: Vec::new(),
        tracklets: tracks.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let r = parse_mot("1,-1,10.0,20.0,30.0,40.0,0.9,-1,-1,-1").unwrap();
        assert_eq!(
            r.detections,
            vec![Detection::new(
                1,
                BoundingBox::new(10.0, 20.0, 30.0, 40.0).unwrap(),
                0.9
            )]
        );
        assert_eq!(parse_mot("").unwrap(), MotRecords::default());
        assert_eq!(parse_mot("1,-1,10,20,30").unwrap_err().line, 1);
    }

    #[test]
    fn tracklet_output_format() {
        let t = Tracklet::with_positions(
            3,
            [
                (2, BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap()),
                (1, BoundingBox::new(0.5, 2.0, 3.0, 4.0).unwrap()),
            ],
        );
        let text = write_tracklets(&[t]);
        assert_eq!(
            text,
            "1,3,0.50,2.00,3.00,4.00,1.0000,-1,-1,-1\n2,3,1.00,2.00,3.00,4.00,1.0000,-1,-1,-1\n"
        );
        assert_eq!(write_records(&parse_mot(&text).unwrap()), text);
    }

    #[test]
    fn malformed_rows() {
        for bad in [
            "0,1,1,1,1,1,1,-1,-1,-1",
            "1,-2,1,1,1,1,1,-1,-1,-1",
            "1,1,1,1,-1,1,1,-1,-1,-1",
            "1,1,1,1,1,nan,1,-1,-1,-1",
            "x,1,1,1,1,1,1",
            "1,1,1,1,1,1,1,-1,-1,-1,5",
        ] {
            assert!(parse_mot(bad).is_err(), "{bad}");
        }
        let dup = "1,1,1,1,1,1,1,-1,-1,-1\n1,1,2,2,2,2,1,-1,-1,-1\n";
        assert_eq!(parse_mot(dup).unwrap_err().line, 2);
    }
}
