//! Streaming walk over the main document part.
//!
//! Body paragraphs are the direct `w:p` children of `w:body`. Runs are the
//! `w:r` children of such a paragraph, including runs wrapped in a
//! `w:hyperlink`. Everything else (tables, content controls, tracked
//! insertions) is passed through untouched.

use std::collections::BTreeMap;

use quick_xml::events::{BytesEnd, BytesStart, BytesText, Event};
use quick_xml::name::ResolveResult;
use quick_xml::reader::NsReader;
use quick_xml::writer::Writer;

use super::{DocxError, RunRef};

const W_NS: &str = "http://schemas.openxmlformats.org/wordprocessingml/2006/main";
const W_NS_STRICT: &str = "http://purl.oclc.org/ooxml/wordprocessingml/main";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frame {
    Document,
    Body,
    Paragraph,
    Hyperlink,
    Run,
    RunText,
    Table,
    Other,
}

/// What a single element means for run extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunChild {
    Props,
    Text,
    Tab,
    Break,
    Other,
}

fn w_local<'a>(res: &ResolveResult<'_>, local: &'a str) -> Option<&'a str> {
    match res {
        ResolveResult::Bound(ns) if ns.as_ref() == W_NS || ns.as_ref() == W_NS_STRICT => Some(local),
        _ => None,
    }
}

fn classify_run_child(local: Option<&str>) -> RunChild {
    match local {
        Some("rPr") => RunChild::Props,
        Some("t") => RunChild::Text,
        Some("tab") => RunChild::Tab,
        Some("br") | Some("cr") => RunChild::Break,
        _ => RunChild::Other,
    }
}

fn malformed(err: impl std::fmt::Display) -> DocxError {
    DocxError::MalformedXml(err.to_string())
}

fn decode_ref(name: &str, raw: &quick_xml::events::BytesRef<'_>) -> Result<char, DocxError> {
    if let Some(c) = raw.resolve_char_ref().map_err(malformed)? {
        return Ok(c);
    }
    match name {
        "lt" => Ok('<'),
        "gt" => Ok('>'),
        "amp" => Ok('&'),
        "apos" => Ok('\''),
        "quot" => Ok('"'),
        other => Err(DocxError::MalformedXml(format!("unknown entity &{other};"))),
    }
}

/// Tracks where the reader is relative to body paragraphs and runs.
#[derive(Default)]
struct Cursor {
    stack: Vec<Frame>,
    paragraph: Option<usize>,
    next_paragraph: usize,
    next_run: usize,
    table_cells: usize,
}

impl Cursor {
    fn parent(&self) -> Option<Frame> {
        self.stack.last().copied()
    }

    fn in_table(&self) -> bool {
        self.stack.contains(&Frame::Table)
    }

    /// Classifies an element that is being opened (or is self-closing).
    fn classify(&mut self, local: Option<&str>) -> Frame {
        if self.in_table() && local == Some("tc") {
            self.table_cells += 1;
        }
        match (self.parent(), local) {
            (None, Some("document")) => Frame::Document,
            (Some(Frame::Document), Some("body")) => Frame::Body,
            (Some(Frame::Body), Some("p")) => {
                self.paragraph = Some(self.next_paragraph);
                self.next_paragraph += 1;
                self.next_run = 0;
                Frame::Paragraph
            }
            (Some(Frame::Body), Some("tbl")) => Frame::Table,
            (Some(Frame::Paragraph), Some("hyperlink")) => Frame::Hyperlink,
            (Some(Frame::Paragraph | Frame::Hyperlink), Some("r")) => Frame::Run,
            (Some(Frame::Run), Some("t")) => Frame::RunText,
            _ => Frame::Other,
        }
    }

    fn take_run_index(&mut self) -> (usize, usize) {
        let p = self.paragraph.expect("run outside paragraph");
        let r = self.next_run;
        self.next_run += 1;
        (p, r)
    }
}

/// Result of scanning a main document part.
pub(super) struct Scan {
    pub runs: Vec<RunRef>,
    pub paragraphs: usize,
    pub table_cells: usize,
}

pub(super) fn scan(xml: &str) -> Result<Scan, DocxError> {
    let mut reader = NsReader::from_str(xml);
    let mut cur = Cursor::default();
    let mut runs: Vec<RunRef> = Vec::new();
    let mut saw_document = false;

    loop {
        let (res, event) = reader.read_resolved_event().map_err(malformed)?;
        match event {
            Event::Start(e) => {
                let frame = cur.classify(w_local(&res, e.local_name().as_ref()));
                saw_document |= frame == Frame::Document;
                if frame == Frame::Run {
                    let (p, r) = cur.take_run_index();
                    runs.push(RunRef::new(p, r, String::new()));
                }
                cur.stack.push(frame);
            }
            Event::Empty(e) => {
                let name = e.local_name();
                let local = w_local(&res, name.as_ref());
                let frame = cur.classify(local);
                saw_document |= frame == Frame::Document;
                match frame {
                    Frame::Run => {
                        let (p, r) = cur.take_run_index();
                        runs.push(RunRef::new(p, r, String::new()));
                    }
                    _ if cur.parent() == Some(Frame::Run) => {
                        let run = runs.last_mut().expect("open run");
                        match classify_run_child(local) {
                            RunChild::Tab => run.text.push('\t'),
                            RunChild::Break => run.text.push('\n'),
                            _ => {}
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) if cur.parent() == Some(Frame::RunText) => {
                runs.last_mut().expect("open run").text.push_str(&t.xml10_content());
            }
            Event::CData(t) if cur.parent() == Some(Frame::RunText) => {
                let text = t.xml10_content();
                runs.last_mut().expect("open run").text.push_str(&text);
            }
            Event::GeneralRef(r) if cur.parent() == Some(Frame::RunText) => {
                let c = decode_ref(&r.xml10_content(), &r)?;
                runs.last_mut().expect("open run").text.push(c);
            }
            Event::GeneralRef(r) => {
                decode_ref(&r.xml10_content(), &r)?;
            }
            Event::End(_) => {
                if cur.stack.pop() == Some(Frame::Paragraph) {
                    cur.paragraph = None;
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !saw_document {
        return Err(DocxError::MalformedXml("main part has no w:document root".into()));
    }
    Ok(Scan {
        runs,
        paragraphs: cur.next_paragraph,
        table_cells: cur.table_cells,
    })
}

/// Escapes run text for a `w:t` element. Carriage returns become character
/// references so they survive end-of-line normalisation.
fn escape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#xD;"),
            c => out.push(c),
        }
    }
    out
}

fn qualified(prefix: &Option<String>, local: &str) -> String {
    match prefix {
        Some(p) => format!("{p}:{local}"),
        None => local.to_string(),
    }
}

fn new_text_events(prefix: &Option<String>, text: &str) -> Vec<Event<'static>> {
    let mut events = Vec::new();
    let t = qualified(prefix, "t");
    let push_segment = |segment: &str, events: &mut Vec<Event<'static>>| {
        if segment.is_empty() {
            return;
        }
        let mut start = BytesStart::new(t.clone());
        start.push_attribute(("xml:space", "preserve"));
        events.push(Event::Start(start));
        events.push(Event::Text(BytesText::from_escaped(escape_text(segment))));
        events.push(Event::End(BytesEnd::new(t.clone())));
    };
    let mut segment = String::new();
    for c in text.chars() {
        match c {
            '\t' | '\n' => {
                push_segment(&segment, &mut events);
                segment.clear();
                let local = if c == '\t' { "tab" } else { "br" };
                events.push(Event::Empty(BytesStart::new(qualified(prefix, local))));
            }
            c => segment.push(c),
        }
    }
    push_segment(&segment, &mut events);
    events
}

/// One top-level child of a captured run: its classification and events.
struct Item {
    kind: Option<RunChild>,
    events: Vec<Event<'static>>,
}

fn rewrite_run(
    start: BytesStart<'static>,
    children: Vec<(Option<RunChild>, Event<'static>, usize)>,
    text: &str,
) -> Vec<Event<'static>> {
    let prefix = start.name().prefix().map(|p| p.as_ref().to_string());

    let mut items: Vec<Item> = Vec::new();
    for (kind, event, depth) in children {
        if depth == 0 {
            items.push(Item {
                kind,
                events: vec![event],
            });
        } else {
            items.last_mut().expect("nested event").events.push(event);
        }
    }

    let is_text = |k: &Option<RunChild>| matches!(k, Some(RunChild::Text | RunChild::Tab | RunChild::Break));
    let insert_at = items
        .iter()
        .position(|i| is_text(&i.kind))
        .or_else(|| {
            items
                .iter()
                .position(|i| i.kind == Some(RunChild::Props))
                .map(|i| i + 1)
        })
        .unwrap_or(0);

    let end = BytesEnd::new(start.name().as_ref().to_string());
    let count = items.len();
    let mut out = vec![Event::Start(start)];
    for (idx, item) in items.into_iter().enumerate() {
        if idx == insert_at {
            out.extend(new_text_events(&prefix, text));
        }
        if !is_text(&item.kind) {
            out.extend(item.events);
        }
    }
    if insert_at >= count {
        out.extend(new_text_events(&prefix, text));
    }
    out.push(Event::End(end));
    out
}

/// Rewrites the main document part, replacing the text of every run named
/// in `edits`. Returns the new XML and the set of edit keys that matched.
pub(super) fn rewrite(
    xml: &str,
    edits: &BTreeMap<(usize, usize), String>,
) -> Result<(String, Vec<(usize, usize)>), DocxError> {
    let mut reader = NsReader::from_str(xml);
    let mut writer = Writer::new(Vec::with_capacity(xml.len() + 256));
    let mut cur = Cursor::default();
    let mut hit: Vec<(usize, usize)> = Vec::new();

    // Capture state for a run being replaced.
    let mut capture: Option<(BytesStart<'static>, String)> = None;
    let mut captured: Vec<(Option<RunChild>, Event<'static>, usize)> = Vec::new();
    let mut capture_depth = 0usize;

    loop {
        let (res, event) = reader.read_resolved_event().map_err(malformed)?;
        if let Event::Eof = event {
            break;
        }
        if capture.is_some() {
            match &event {
                Event::Start(e) => {
                    let kind = (capture_depth == 0).then(|| classify_run_child(w_local(&res, e.local_name().as_ref())));
                    captured.push((kind, event.into_owned(), capture_depth));
                    capture_depth += 1;
                }
                Event::Empty(e) => {
                    let kind = (capture_depth == 0).then(|| classify_run_child(w_local(&res, e.local_name().as_ref())));
                    captured.push((kind, event.into_owned(), capture_depth));
                }
                Event::End(_) if capture_depth == 0 => {
                    let (start, text) = capture.take().expect("capture");
                    for e in rewrite_run(start, std::mem::take(&mut captured), &text) {
                        writer.write_event(e).map_err(malformed)?;
                    }
                    cur.stack.pop();
                }
                Event::End(_) => {
                    capture_depth -= 1;
                    captured.push((None, event.into_owned(), capture_depth + 1));
                }
                _ => {
                    let kind = (capture_depth == 0).then_some(RunChild::Other);
                    captured.push((kind, event.into_owned(), capture_depth));
                }
            }
            continue;
        }

        match &event {
            Event::Start(e) => {
                let frame = cur.classify(w_local(&res, e.local_name().as_ref()));
                cur.stack.push(frame);
                if frame == Frame::Run {
                    let key = cur.take_run_index();
                    if let Some(text) = edits.get(&key) {
                        hit.push(key);
                        capture = Some((e.clone().into_owned(), text.clone()));
                        capture_depth = 0;
                        continue;
                    }
                }
            }
            Event::Empty(e) => {
                let frame = cur.classify(w_local(&res, e.local_name().as_ref()));
                if frame == Frame::Run {
                    let key = cur.take_run_index();
                    if let Some(text) = edits.get(&key) {
                        hit.push(key);
                        let start = e.clone().into_owned();
                        for ev in rewrite_run(start, Vec::new(), text) {
                            writer.write_event(ev).map_err(malformed)?;
                        }
                        continue;
                    }
                }
            }
            Event::End(_) if cur.stack.pop() == Some(Frame::Paragraph) => {
                cur.paragraph = None;
            }
            _ => {}
        }
        writer.write_event(event).map_err(malformed)?;
    }

    let bytes = writer.into_inner();
    let xml = String::from_utf8(bytes).map_err(malformed)?;
    Ok((xml, hit))
}
