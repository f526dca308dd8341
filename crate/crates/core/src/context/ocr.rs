//! Rasterizer and OCR adapters, and the word-box format they exchange.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::ContextError;
use crate::digest::sha256_hex;

pub const MIN_DPI: u32 = 150;
pub const DEFAULT_DPI: u32 = 200;

/// A rendered page, stored as a PNG file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageImage {
    /// Zero-based.
    pub page: u32,
    pub width_px: u32,
    pub height_px: u32,
    pub dpi: u32,
    pub path: PathBuf,
}

impl PageImage {
    pub fn file_name(page: u32) -> String {
        format!("page-{:04}.png", page + 1)
    }

    /// Page size in points.
    pub fn size_pts(&self) -> (f64, f64) {
        let k = 72.0 / self.dpi as f64;
        (self.width_px as f64 * k, self.height_px as f64 * k)
    }
}

/// Width and height from a PNG header.
pub fn png_dimensions(bytes: &[u8]) -> Option<(u32, u32)> {
    const SIG: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.len() < 24 || !bytes.starts_with(SIG) || &bytes[12..16] != b"IHDR" {
        return None;
    }
    let w = u32::from_be_bytes(bytes[16..20].try_into().ok()?);
    let h = u32::from_be_bytes(bytes[20..24].try_into().ok()?);
    Some((w, h))
}

/// A recognised word in pixel coordinates, origin top-left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrWord {
    pub text: String,
    pub left: u32,
    pub top: u32,
    pub width: u32,
    pub height: u32,
    pub conf: f64,
    /// (block, paragraph, line)
    pub line: (u32, u32, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrPage {
    pub page: u32,
    pub dpi: u32,
    pub width_px: u32,
    pub height_px: u32,
    /// Plain text, one OCR line per line.
    pub text: String,
    pub words: Vec<OcrWord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl OcrPage {
    pub fn empty(image: &PageImage, diagnostic: String) -> Self {
        Self {
            page: image.page,
            dpi: image.dpi,
            width_px: image.width_px,
            height_px: image.height_px,
            text: String::new(),
            words: Vec::new(),
            diagnostics: vec![diagnostic],
        }
    }

    pub fn from_output(image: &PageImage, output: &str) -> Self {
        let (text, words) = if output.starts_with("level\t") {
            let words = parse_tsv(output);
            (lines_of(&words), words)
        } else {
            (output.trim_end().to_string(), Vec::new())
        };
        Self {
            page: image.page,
            dpi: image.dpi,
            width_px: image.width_px,
            height_px: image.height_px,
            text,
            words,
            diagnostics: Vec::new(),
        }
    }
}

/// Word rows (level 5) of tesseract-style TSV.
pub fn parse_tsv(tsv: &str) -> Vec<OcrWord> {
    let mut words = Vec::new();
    for row in tsv.lines().skip(1) {
        let cols: Vec<&str> = row.splitn(12, '\t').collect();
        if cols.len() < 12 || cols[0] != "5" {
            continue;
        }
        let n = |i: usize| cols[i].trim().parse::<u32>().unwrap_or(0);
        let text = cols[11].trim();
        if text.is_empty() {
            continue;
        }
        words.push(OcrWord {
            text: text.to_string(),
            left: n(6),
            top: n(7),
            width: n(8),
            height: n(9),
            conf: cols[10].trim().parse().unwrap_or(-1.0),
            line: (n(2), n(3), n(4)),
        });
    }
    words
}

pub fn write_tsv(page: u32, words: &[OcrWord]) -> String {
    let mut out =
        String::from("level\tpage_num\tblock_num\tpar_num\tline_num\tword_num\tleft\ttop\twidth\theight\tconf\ttext\n");
    let mut word_num = 0;
    let mut last = None;
    for w in words {
        if last != Some(w.line) {
            word_num = 0;
            last = Some(w.line);
        }
        word_num += 1;
        out.push_str(&format!(
            "5\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            page + 1,
            w.line.0,
            w.line.1,
            w.line.2,
            word_num,
            w.left,
            w.top,
            w.width,
            w.height,
            w.conf,
            w.text
        ));
    }
    out
}

/// Joins words into lines in the order the engine reported them.
fn lines_of(words: &[OcrWord]) -> String {
    let mut lines: Vec<(u32, u32, u32, Vec<&str>)> = Vec::new();
    for w in words {
        match lines.last_mut() {
            Some(l) if (l.0, l.1, l.2) == w.line => l.3.push(&w.text),
            _ => lines.push((w.line.0, w.line.1, w.line.2, vec![&w.text])),
        }
    }
    lines.into_iter().map(|l| l.3.join(" ")).collect::<Vec<_>>().join("\n")
}

pub trait Rasterizer: Send + Sync {
    fn name(&self) -> String;
    /// Renders every page into `out_dir` as `page-NNNN.png`.
    fn rasterize(&self, pdf: &[u8], dpi: u32, out_dir: &Path) -> Result<Vec<PageImage>, ContextError>;
}

pub trait OcrEngine: Send + Sync {
    fn name(&self) -> String;
    /// Tesseract-style TSV, or plain UTF-8 text.
    fn recognize(&self, image: &PageImage) -> Result<String, ContextError>;
}

fn substitute(args: &[String], slots: &[(&str, &str)]) -> Vec<String> {
    args.iter()
        .map(|a| {
            slots
                .iter()
                .fold(a.clone(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
        })
        .collect()
}

fn run(program: &str, args: &[String], unavailable: impl Fn(String) -> ContextError) -> Result<Vec<u8>, ContextError> {
    let output = Command::new(program)
        .args(args)
        .output()
        .map_err(|e| unavailable(format!("cannot run '{program}': {e}")))?;
    if !output.status.success() {
        return Err(ContextError::AdapterFailed {
            program: program.to_string(),
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    Ok(output.stdout)
}

/// A rasterizer run as a subprocess.
///
/// Arguments may use `{input}`, `{output_dir}` and `{dpi}`. The program must
/// write one `page-NNNN.png` per page into the output directory, numbered
/// from 1, and exit non-zero on failure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandRasterizer {
    pub program: String,
    pub args: Vec<String>,
}

impl Rasterizer for CommandRasterizer {
    fn name(&self) -> String {
        format!("command:{}", self.program)
    }

    fn rasterize(&self, pdf: &[u8], dpi: u32, out_dir: &Path) -> Result<Vec<PageImage>, ContextError> {
        check_dpi(dpi)?;
        fs::create_dir_all(out_dir)?;
        let input = out_dir.join("input.pdf");
        fs::write(&input, pdf)?;
        let args = substitute(
            &self.args,
            &[
                ("input", &input.to_string_lossy()),
                ("output_dir", &out_dir.to_string_lossy()),
                ("dpi", &dpi.to_string()),
            ],
        );
        let result = run(&self.program, &args, ContextError::RendererUnavailable);
        let _ = fs::remove_file(&input);
        result?;
        collect_pages(out_dir, dpi)
    }
}

/// An OCR engine run as a subprocess: `{image}` in, text or TSV on stdout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandOcr {
    pub program: String,
    pub args: Vec<String>,
}

impl OcrEngine for CommandOcr {
    fn name(&self) -> String {
        format!("command:{}", self.program)
    }

    fn recognize(&self, image: &PageImage) -> Result<String, ContextError> {
        let args = substitute(&self.args, &[("image", &image.path.to_string_lossy())]);
        let out = run(&self.program, &args, ContextError::OcrUnavailable)?;
        String::from_utf8(out).map_err(|e| ContextError::OcrFailure {
            page: image.page,
            reason: e.to_string(),
        })
    }
}

fn check_dpi(dpi: u32) -> Result<(), ContextError> {
    if dpi < MIN_DPI {
        return Err(ContextError::DpiTooLow(dpi));
    }
    Ok(())
}

fn collect_pages(dir: &Path, dpi: u32) -> Result<Vec<PageImage>, ContextError> {
    let mut images = Vec::new();
    for page in 0.. {
        let path = dir.join(PageImage::file_name(page));
        if !path.exists() {
            break;
        }
        let bytes = fs::read(&path)?;
        let (width_px, height_px) = png_dimensions(&bytes).ok_or_else(|| ContextError::RenderFailure {
            page,
            reason: format!("{} is not a PNG", path.display()),
        })?;
        images.push(PageImage {
            page,
            width_px,
            height_px,
            dpi,
            path,
        });
    }
    if images.is_empty() {
        return Err(ContextError::RenderFailure {
            page: 0,
            reason: format!("no page-0001.png written to {}", dir.display()),
        });
    }
    Ok(images)
}

/// What a recording was made from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingManifest {
    pub stamped_sha256: String,
    pub dpi: u32,
    pub pages: u32,
    pub rasterizer: String,
    pub ocr: String,
    /// Word substitutions applied after recognition, as `from -> to`.
    #[serde(default)]
    pub edits: Vec<String>,
}

impl RecordingManifest {
    pub fn load(dir: &Path) -> Result<Self, ContextError> {
        let path = dir.join("manifest.json");
        let raw = fs::read_to_string(&path).map_err(|e| ContextError::Recording(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| ContextError::Recording(format!("{}: {e}", path.display())))
    }
}

/// Replays page images from `dir/pages`, refusing input that differs from
/// the recorded stamped PDF.
#[derive(Debug, Clone)]
pub struct RecordedRasterizer {
    pub dir: PathBuf,
}

impl Rasterizer for RecordedRasterizer {
    fn name(&self) -> String {
        format!("recorded:{}", self.dir.display())
    }

    fn rasterize(&self, pdf: &[u8], dpi: u32, out_dir: &Path) -> Result<Vec<PageImage>, ContextError> {
        check_dpi(dpi)?;
        let manifest = RecordingManifest::load(&self.dir)?;
        let digest = sha256_hex(pdf);
        if digest != manifest.stamped_sha256 {
            return Err(ContextError::Recording(format!(
                "stamped PDF {digest} does not match the recording ({}); re-record the fixture",
                manifest.stamped_sha256
            )));
        }
        if dpi != manifest.dpi {
            return Err(ContextError::Recording(format!(
                "recording is at {} dpi, {dpi} requested",
                manifest.dpi
            )));
        }
        fs::create_dir_all(out_dir)?;
        for page in 0..manifest.pages {
            let name = PageImage::file_name(page);
            fs::copy(self.dir.join("pages").join(&name), out_dir.join(&name))?;
        }
        collect_pages(out_dir, dpi)
    }
}

/// Replays `dir/ocr/page-NNNN.tsv` for each image.
#[derive(Debug, Clone)]
pub struct RecordedOcr {
    pub dir: PathBuf,
}

impl OcrEngine for RecordedOcr {
    fn name(&self) -> String {
        format!("recorded:{}", self.dir.display())
    }

    fn recognize(&self, image: &PageImage) -> Result<String, ContextError> {
        let path = self.dir.join("ocr").join(format!("page-{:04}.tsv", image.page + 1));
        fs::read_to_string(&path).map_err(|e| ContextError::OcrFailure {
            page: image.page,
            reason: format!("{}: {e}", path.display()),
        })
    }
}

/// Runs OCR on all pages concurrently. A page that fails contributes empty
/// text and a diagnostic.
pub fn ocr_pages(images: &[PageImage], engine: &dyn OcrEngine) -> Result<Vec<OcrPage>, ContextError> {
    let results: Vec<Result<String, ContextError>> = std::thread::scope(|s| {
        let handles: Vec<_> = images
            .iter()
            .map(|img| s.spawn(move || engine.recognize(img)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(ContextError::Recording("OCR thread panicked".into())))
            })
            .collect()
    });
    let mut pages = Vec::with_capacity(images.len());
    for (image, result) in images.iter().zip(results) {
        match result {
            Ok(out) => pages.push(OcrPage::from_output(image, &out)),
            Err(e @ ContextError::OcrUnavailable(_)) => return Err(e),
            Err(e) => pages.push(OcrPage::empty(image, format!("page {}: {e}", image.page + 1))),
        }
    }
    Ok(pages)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(page: u32) -> PageImage {
        PageImage {
            page,
            width_px: 1700,
            height_px: 2200,
            dpi: 200,
            path: PathBuf::from("/nonexistent.png"),
        }
    }

    #[test]
    fn tsv_round_trip() {
        let words = vec![
            OcrWord {
                text: "Your".into(),
                left: 10,
                top: 20,
                width: 40,
                height: 12,
                conf: 95.5,
                line: (1, 1, 1),
            },
            OcrWord {
                text: "{{field_01}}".into(),
                left: 60,
                top: 20,
                width: 90,
                height: 12,
                conf: 88.0,
                line: (1, 1, 1),
            },
            OcrWord {
                text: "Next".into(),
                left: 10,
                top: 50,
                width: 40,
                height: 12,
                conf: 90.0,
                line: (1, 1, 2),
            },
        ];
        let tsv = write_tsv(0, &words);
        assert_eq!(parse_tsv(&tsv), words);
        let page = OcrPage::from_output(&image(0), &tsv);
        assert_eq!(page.text, "Your {{field_01}}\nNext");
    }

    #[test]
    fn plain_text_output() {
        let page = OcrPage::from_output(&image(1), "Your name: {{field_01}}\n\n");
        assert_eq!(page.text, "Your name: {{field_01}}");
        assert!(page.words.is_empty());
    }

    #[test]
    fn blank_page_is_empty() {
        let page = OcrPage::from_output(
            &image(0),
            "level\tpage_num\tblock_num\tpar_num\tline_num\tword_num\tleft\ttop\twidth\theight\tconf\ttext\n",
        );
        assert_eq!(page.text, "");
    }

    #[test]
    fn png_header() {
        let mut png = b"\x89PNG\r\n\x1a\n\0\0\0\rIHDR".to_vec();
        png.extend_from_slice(&1700u32.to_be_bytes());
        png.extend_from_slice(&2200u32.to_be_bytes());
        assert_eq!(png_dimensions(&png), Some((1700, 2200)));
        assert_eq!(png_dimensions(b"GIF89a"), None);
    }

    #[test]
    fn missing_programs_are_unavailable() {
        let r = CommandRasterizer {
            program: "formdraft-no-such-rasterizer".into(),
            args: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            r.rasterize(b"%PDF-", 200, dir.path()),
            Err(ContextError::RendererUnavailable(_))
        ));
        assert!(matches!(
            r.rasterize(b"%PDF-", 100, dir.path()),
            Err(ContextError::DpiTooLow(100))
        ));
        let o = CommandOcr {
            program: "formdraft-no-such-ocr".into(),
            args: vec!["{image}".into()],
        };
        assert!(matches!(
            ocr_pages(&[image(0)], &o),
            Err(ContextError::OcrUnavailable(_))
        ));
    }

    #[test]
    fn failed_page_degrades() {
        struct Flaky;
        impl OcrEngine for Flaky {
            fn name(&self) -> String {
                "flaky".into()
            }
            fn recognize(&self, image: &PageImage) -> Result<String, ContextError> {
                if image.page == 1 {
                    Err(ContextError::OcrFailure {
                        page: 1,
                        reason: "boom".into(),
                    })
                } else {
                    Ok("hello".into())
                }
            }
        }
        let pages = ocr_pages(&[image(0), image(1), image(2)], &Flaky).unwrap();
        assert_eq!(pages.iter().map(|p| p.page).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(pages[1].text, "");
        assert_eq!(pages[1].diagnostics.len(), 1);
        assert_eq!(pages[2].text, "hello");
    }
}
