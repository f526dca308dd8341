//! Nearby text for small fields, from OCR word boxes.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::OcrPage;
use crate::pdf::{FieldDescriptor, Rect};

/// An OCR word in PDF points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordBox {
    pub page: u32,
    pub text: String,
    pub rect: Rect,
    pub line: (u32, u32, u32),
}

/// Converts pixel boxes (origin top-left) to points (origin bottom-left).
pub fn page_words(page: &OcrPage) -> Vec<WordBox> {
    let k = 72.0 / page.dpi as f64;
    let height = page.height_px as f64 * k;
    page.words
        .iter()
        .map(|w| {
            let x0 = w.left as f64 * k;
            let x1 = (w.left + w.width) as f64 * k;
            let top = height - w.top as f64 * k;
            let bottom = height - (w.top + w.height) as f64 * k;
            WordBox {
                page: page.page,
                text: w.text.clone(),
                rect: Rect::new(x0, bottom, x1, top),
                line: w.line,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingParams {
    /// Largest horizontal gap between a field and its label.
    pub radius_pts: f64,
    /// Largest distance between the vertical centres of field and label.
    pub vertical_pts: f64,
}

impl Default for PairingParams {
    fn default() -> Self {
        Self {
            radius_pts: 150.0,
            vertical_pts: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Right,
    Left,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCandidate {
    pub field: String,
    pub page: u32,
    pub label: Option<String>,
    pub side: Option<Side>,
    pub distance_pts: Option<f64>,
}

static TOKENISH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)[({\[]{2}\s*field").expect("valid regex"));

fn centre_y(r: &Rect) -> f64 {
    (r.y0 + r.y1) / 2.0
}

struct Choice {
    word: usize,
    side: Side,
    distance: f64,
}

/// Proposes a label for each small field: the nearest word to its right, or
/// failing that to its left, extended to the adjacent words on the same line.
/// A word anchors at most one field; the nearer field keeps it.
pub fn label_candidates(fields: &[FieldDescriptor], words: &[WordBox], params: &PairingParams) -> Vec<LabelCandidate> {
    let eligible: Vec<bool> = words
        .iter()
        .map(|w| {
            w.text.chars().any(char::is_alphanumeric)
                && !TOKENISH.is_match(&w.text)
                && !fields.iter().any(|f| f.page == w.page && f.bbox.intersects(&w.rect))
        })
        .collect();

    let options: Vec<Vec<Choice>> = fields
        .iter()
        .map(|f| {
            let mut right = Vec::new();
            let mut left = Vec::new();
            for (i, w) in words.iter().enumerate() {
                if !eligible[i] || w.page != f.page {
                    continue;
                }
                if (centre_y(&w.rect) - centre_y(&f.bbox)).abs() > params.vertical_pts {
                    continue;
                }
                let to_right = w.rect.x0 - f.bbox.x1;
                let to_left = f.bbox.x0 - w.rect.x1;
                if to_right >= -1.0 && to_right <= params.radius_pts {
                    right.push(Choice {
                        word: i,
                        side: Side::Right,
                        distance: to_right.max(0.0),
                    });
                } else if to_left >= -1.0 && to_left <= params.radius_pts {
                    left.push(Choice {
                        word: i,
                        side: Side::Left,
                        distance: to_left.max(0.0),
                    });
                }
            }
            right.sort_by(|a, b| a.distance.total_cmp(&b.distance));
            left.sort_by(|a, b| a.distance.total_cmp(&b.distance));
            right.extend(left);
            right
        })
        .collect();

    // Fields propose in order of preference; a word keeps the nearest field.
    let mut next = vec![0usize; fields.len()];
    let mut holder: Vec<Option<usize>> = vec![None; words.len()];
    let mut free: Vec<usize> = (0..fields.len()).rev().collect();
    while let Some(f) = free.pop() {
        let Some(opt) = options[f].get(next[f]) else {
            continue;
        };
        next[f] += 1;
        match holder[opt.word] {
            None => holder[opt.word] = Some(f),
            Some(other) => {
                let theirs = &options[other][next[other] - 1];
                if opt.distance < theirs.distance {
                    holder[opt.word] = Some(f);
                    free.push(other);
                } else {
                    free.push(f);
                }
            }
        }
    }

    let mut assigned: Vec<Option<&Choice>> = vec![None; fields.len()];
    for (w, h) in holder.iter().enumerate() {
        if let Some(f) = h {
            assigned[*f] = options[*f].iter().find(|o| o.word == w);
        }
    }

    fields
        .iter()
        .zip(assigned)
        .map(|(f, opt)| match opt {
            Some(o) => LabelCandidate {
                field: f.name.clone(),
                page: f.page,
                label: Some(phrase(words, &eligible, o.word, o.side)),
                side: Some(o.side),
                distance_pts: Some(o.distance),
            },
            None => LabelCandidate {
                field: f.name.clone(),
                page: f.page,
                label: None,
                side: None,
                distance_pts: None,
            },
        })
        .collect()
}

/// The anchor word plus its neighbours on the same line, read away from the field.
fn phrase(words: &[WordBox], eligible: &[bool], anchor: usize, side: Side) -> String {
    let a = &words[anchor];
    let mut line: Vec<usize> = (0..words.len())
        .filter(|&i| words[i].page == a.page && words[i].line == a.line)
        .collect();
    line.sort_by(|&i, &j| words[i].rect.x0.total_cmp(&words[j].rect.x0));
    let pos = line.iter().position(|&i| i == anchor).expect("anchor on its line");
    let max_gap = a.rect.height().max(6.0) * 1.5;

    let mut picked = vec![anchor];
    let step = |from: usize, to: usize| {
        let (l, r) = (&words[from].rect, &words[to].rect);
        let gap = if r.x0 >= l.x1 { r.x0 - l.x1 } else { l.x0 - r.x1 };
        eligible[to] && gap <= max_gap
    };
    match side {
        Side::Right => {
            for k in pos + 1..line.len() {
                if !step(line[k - 1], line[k]) {
                    break;
                }
                picked.push(line[k]);
            }
        }
        Side::Left => {
            for k in (0..pos).rev() {
                if !step(line[k + 1], line[k]) {
                    break;
                }
                picked.insert(0, line[k]);
            }
        }
    }
    picked
        .iter()
        .map(|&i| words[i].text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::OcrWord;
    use crate::pdf::{FieldKind, SizeClass};

    fn checkbox(name: &str, x: f64, y: f64) -> FieldDescriptor {
        FieldDescriptor {
            name: name.into(),
            kind: FieldKind::Checkbox,
            page: 0,
            bbox: Rect::new(x, y, x + 12.0, y + 12.0),
            size_class: SizeClass::Small,
            widget_count: 1,
            options: vec![],
        }
    }

    /// Words laid out left to right on one line, 4 pt apart, baseline at `y`.
    fn line(x: f64, y: f64, line_no: u32, text: &str) -> Vec<WordBox> {
        let mut x = x;
        text.split(' ')
            .map(|t| {
                let w = t.len() as f64 * 5.5;
                let b = WordBox {
                    page: 0,
                    text: t.into(),
                    rect: Rect::new(x, y, x + w, y + 11.0),
                    line: (1, 1, line_no),
                };
                x += w + 4.0;
                b
            })
            .collect()
    }

    #[test]
    fn label_to_the_right() {
        let words = line(92.0, 430.0, 1, "Request a jury trial");
        let c = label_candidates(&[checkbox("jury", 72.0, 430.0)], &words, &PairingParams::default());
        assert_eq!(c[0].label.as_deref(), Some("Request a jury trial"));
        assert_eq!(c[0].side, Some(Side::Right));
        assert!((c[0].distance_pts.unwrap() - 8.0).abs() < 1e-9);
    }

    #[test]
    fn right_is_preferred_over_nearer_left() {
        let mut words = line(20.0, 430.0, 1, "Yes");
        words.extend(line(140.0, 430.0, 1, "No"));
        // "Yes" is 43.5 pt to the left, "No" 48 pt to the right.
        let c = label_candidates(&[checkbox("b", 80.0, 430.0)], &words, &PairingParams::default());
        assert_eq!(c[0].label.as_deref(), Some("No"));
    }

    #[test]
    fn left_label_when_nothing_on_right() {
        let words = line(10.0, 430.0, 1, "Office use only:");
        let c = label_candidates(&[checkbox("b", 110.0, 430.0)], &words, &PairingParams::default());
        assert_eq!(c[0].label.as_deref(), Some("Office use only:"));
        assert_eq!(c[0].side, Some(Side::Left));
    }

    #[test]
    fn out_of_radius_or_off_line_is_unpaired() {
        let words = line(72.0, 300.0, 1, "Office use only:");
        let far = checkbox("far", 480.0, 300.0);
        let below = checkbox("below", 72.0, 270.0);
        let c = label_candidates(&[far, below], &words, &PairingParams::default());
        assert!(c.iter().all(|c| c.label.is_none()));
    }

    #[test]
    fn shared_word_goes_to_nearer_box() {
        // Both boxes see "Married" to their right; the nearer one keeps it.
        let words = line(100.0, 430.0, 1, "Married");
        let a = checkbox("a", 40.0, 430.0); // 48 pt away
        let b = checkbox("b", 80.0, 430.0); // 8 pt away
        let c = label_candidates(&[a, b], &words, &PairingParams::default());
        assert_eq!(c[0].label, None);
        assert_eq!(c[1].label.as_deref(), Some("Married"));
    }

    #[test]
    fn loser_falls_back_to_next_option() {
        let mut words = line(10.0, 430.0, 1, "Single");
        words.extend(line(100.0, 430.0, 1, "Married"));
        let a = checkbox("a", 50.0, 430.0);
        let b = checkbox("b", 80.0, 430.0);
        let c = label_candidates(&[a, b], &words, &PairingParams::default());
        assert_eq!(c[1].label.as_deref(), Some("Married"));
        assert_eq!(c[0].label.as_deref(), Some("Single"));
    }

    #[test]
    fn tokens_and_punctuation_are_not_labels() {
        let mut words = line(92.0, 430.0, 1, "--");
        words.extend(line(110.0, 430.0, 2, "{{field_03}}"));
        let c = label_candidates(&[checkbox("b", 72.0, 430.0)], &words, &PairingParams::default());
        assert_eq!(c[0].label, None);
    }

    #[test]
    fn pixel_to_point_conversion() {
        let page = OcrPage {
            page: 0,
            dpi: 200,
            width_px: 1700,
            height_px: 2200,
            text: String::new(),
            words: vec![OcrWord {
                text: "x".into(),
                left: 200,
                top: 100,
                width: 50,
                height: 25,
                conf: 90.0,
                line: (1, 1, 1),
            }],
            diagnostics: vec![],
        };
        let w = &page_words(&page)[0];
        assert!((w.rect.x0 - 72.0).abs() < 1e-9);
        assert!((w.rect.x1 - 90.0).abs() < 1e-9);
        assert!((w.rect.y1 - (792.0 - 36.0)).abs() < 1e-9);
        assert!((w.rect.y0 - (792.0 - 45.0)).abs() < 1e-9);
    }
}
