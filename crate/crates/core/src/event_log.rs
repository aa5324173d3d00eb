//! Traces, events and logs, plus XES and CSV ingestion.
//!
//! Attribute access is total: any out-of-range index or missing key yields
//! [`AttributeValue::Undefined`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Format {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
}

/// A single attribute value. `Undefined` is ⊥.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    Text(String),
    Number(f64),
    Boolean(bool),
    /// Milliseconds since the Unix epoch, UTC.
    Timestamp(i64),
    Undefined,
}

static UNDEFINED: AttributeValue = AttributeValue::Undefined;

impl AttributeValue {
    pub fn is_undefined(&self) -> bool {
        matches!(self, AttributeValue::Undefined)
    }

    /// Numeric view used by arithmetic: numbers and timestamps pass, everything else is ⊥.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            AttributeValue::Number(x) => Some(*x),
            AttributeValue::Timestamp(t) => Some(*t as f64),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttributeValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Rendering used for labels and concatenation.
    pub fn render(&self) -> String {
        match self {
            AttributeValue::Text(s) => s.clone(),
            AttributeValue::Number(x) => format_number(*x),
            AttributeValue::Boolean(b) => b.to_string(),
            AttributeValue::Timestamp(t) => t.to_string(),
            AttributeValue::Undefined => "⊥".to_string(),
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Shortest round-trip decimal; integral values print without a fractional part.
pub fn format_number(x: f64) -> String {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// 1-based position within the trace.
    pub ordinal: usize,
    pub attributes: BTreeMap<String, AttributeValue>,
}

impl Event {
    pub fn new(ordinal: usize) -> Self {
        Event {
            ordinal,
            attributes: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: AttributeValue) -> Self {
        self.attributes.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> &AttributeValue {
        self.attributes.get(name).unwrap_or(&UNDEFINED)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub id: String,
    /// Trace-level attributes are kept but not reachable from formulas.
    pub attributes: BTreeMap<String, AttributeValue>,
    pub events: Vec<Event>,
}

impl Trace {
    /// Builds a trace from attribute maps, numbering events from 1.
    pub fn new(id: impl Into<String>, events: Vec<BTreeMap<String, AttributeValue>>) -> Self {
        let events = events
            .into_iter()
            .enumerate()
            .map(|(i, attributes)| Event {
                ordinal: i + 1,
                attributes,
            })
            .collect();
        Trace {
            id: id.into(),
            attributes: BTreeMap::new(),
            events,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// The event at 1-based `index`, if any.
    pub fn event(&self, index: i64) -> Option<&Event> {
        if index < 1 {
            return None;
        }
        self.events.get((index - 1) as usize)
    }

    /// Total accessor: ⊥ for indices outside `1..=|τ|` and for missing attributes.
    pub fn attribute(&self, index: i64, name: &str) -> &AttributeValue {
        match self.event(index) {
            Some(e) => e.get(name),
            None => &UNDEFINED,
        }
    }

    /// The first `k` events.
    pub fn prefix(&self, k: usize) -> &[Event] {
        &self.events[..k.min(self.events.len())]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub traces: Vec<Trace>,
}

impl EventLog {
    pub fn new(traces: Vec<Trace>) -> Self {
        EventLog { traces }
    }

    pub fn num_events(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    pub fn trace(&self, id: &str) -> Option<&Trace> {
        self.traces.iter().find(|t| t.id == id)
    }

    pub fn max_trace_len(&self) -> usize {
        self.traces.iter().map(Trace::len).max().unwrap_or(0)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> LogError {
    LogError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_maybe_gz(path: &Path) -> Result<String, LogError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = String::new();
        flate2::read::MultiGzDecoder::new(&bytes[..])
            .read_to_string(&mut out)
            .map_err(|e| io_err(path, e))?;
        Ok(out)
    } else {
        String::from_utf8(bytes).map_err(|e| io_err(path, std::io::Error::other(e)))
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text.as_bytes()[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let col = offset - before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1) + 1;
    (line, col)
}

/// Parses an ISO-8601 / RFC 3339 date into UTC milliseconds. Offsetless values are read as UTC.
pub fn parse_iso_millis(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc).timestamp_millis());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%dT%H:%M:%S%z"] {
        if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
            return Some(dt.with_timezone(&Utc).timestamp_millis());
        }
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&dt).timestamp_millis());
        }
    }
    None
}

enum Frame {
    Trace(Trace),
    Event(Event),
    Skip,
}

struct XesReader<'a> {
    path: &'a Path,
    text: &'a str,
}

impl XesReader<'_> {
    fn err(&self, offset: usize, message: impl Into<String>) -> LogError {
        let (line, column) = line_col(self.text, offset);
        LogError::Format {
            path: self.path.display().to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    fn attr_value(&self, e: &BytesStart<'_>, offset: usize) -> Result<Option<(String, AttributeValue)>, LogError> {
        let kind = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let mut key = None;
        let mut value = None;
        for a in e.attributes() {
            let a = a.map_err(|err| self.err(offset, err.to_string()))?;
            let v = a
                .unescape_value()
                .map_err(|err| self.err(offset, err.to_string()))?
                .into_owned();
            match a.key.as_ref() {
                b"key" => key = Some(v),
                b"value" => value = Some(v),
                _ => {}
            }
        }
        let parsed = match kind.as_str() {
            "list" | "container" => return Ok(None),
            "string" | "id" => value.map(AttributeValue::Text),
            "int" | "float" => match value {
                Some(v) => {
                    Some(AttributeValue::Number(v.trim().parse::<f64>().map_err(|_| {
                        self.err(offset, format!("unparsable {kind} value {v:?}"))
                    })?))
                }
                None => None,
            },
            "boolean" => match value.as_deref().map(str::trim) {
                Some("true") => Some(AttributeValue::Boolean(true)),
                Some("false") => Some(AttributeValue::Boolean(false)),
                Some(v) => return Err(self.err(offset, format!("unparsable boolean {v:?}"))),
                None => None,
            },
            "date" => match value {
                Some(v) => Some(AttributeValue::Timestamp(
                    parse_iso_millis(&v).ok_or_else(|| self.err(offset, format!("unparsable date {v:?}")))?,
                )),
                None => None,
            },
            other => return Err(self.err(offset, format!("unknown attribute kind <{other}>"))),
        };
        let key = key.ok_or_else(|| self.err(offset, "attribute without key"))?;
        let value = parsed.ok_or_else(|| self.err(offset, format!("attribute {key:?} without value")))?;
        Ok(Some((key, value)))
    }

    fn read(&self) -> Result<EventLog, LogError> {
        let mut reader = Reader::from_str(self.text);
        let mut stack: Vec<Frame> = Vec::new();
        let mut traces: Vec<Trace> = Vec::new();
        let mut seen = HashSet::new();
        let mut depth_in_attr = 0usize;
        loop {
            let offset = reader.buffer_position() as usize;
            let ev = reader
                .read_event()
                .map_err(|e| self.err(reader.error_position() as usize, e.to_string()))?;
            match ev {
                XmlEvent::Start(e) => {
                    let name = e.name();
                    if depth_in_attr > 0 {
                        depth_in_attr += 1;
                        continue;
                    }
                    match name.as_ref() {
                        b"trace" => stack.push(Frame::Trace(Trace {
                            id: String::new(),
                            attributes: BTreeMap::new(),
                            events: Vec::new(),
                        })),
                        b"event" => {
                            let n = match stack.last() {
                                Some(Frame::Trace(t)) => t.events.len() + 1,
                                _ => 0,
                            };
                            stack.push(if n > 0 {
                                Frame::Event(Event::new(n))
                            } else {
                                Frame::Skip
                            });
                        }
                        b"log" | b"global" | b"extension" | b"classifier" => stack.push(Frame::Skip),
                        _ => {
                            // attribute with children (list/container or nested meta-attributes)
                            let parsed = self.attr_value(&e, offset)?;
                            self.store(&mut stack, parsed);
                            depth_in_attr = 1;
                        }
                    }
                }
                XmlEvent::Empty(e) => {
                    if depth_in_attr > 0 {
                        continue;
                    }
                    match e.name().as_ref() {
                        b"trace" => return Err(self.err(offset, "trace without events")),
                        b"event" => {
                            if let Some(Frame::Trace(t)) = stack.last_mut() {
                                let n = t.events.len() + 1;
                                t.events.push(Event::new(n));
                            }
                        }
                        b"log" | b"global" | b"extension" | b"classifier" => {}
                        _ => {
                            let parsed = self.attr_value(&e, offset)?;
                            self.store(&mut stack, parsed);
                        }
                    }
                }
                XmlEvent::End(_) => {
                    if depth_in_attr > 0 {
                        depth_in_attr -= 1;
                        continue;
                    }
                    match stack.pop() {
                        Some(Frame::Event(ev)) => {
                            if let Some(Frame::Trace(t)) = stack.last_mut() {
                                t.events.push(ev);
                            }
                        }
                        Some(Frame::Trace(mut t)) => {
                            if t.events.is_empty() {
                                return Err(self.err(offset, "trace without events"));
                            }
                            if t.id.is_empty() {
                                t.id = match t.attributes.get("concept:name") {
                                    Some(v) if !v.is_undefined() => v.render(),
                                    _ => format!("trace-{}", traces.len() + 1),
                                };
                            }
                            if !seen.insert(t.id.clone()) {
                                return Err(self.err(offset, format!("duplicate trace id {:?}", t.id)));
                            }
                            traces.push(t);
                        }
                        _ => {}
                    }
                }
                XmlEvent::Eof => break,
                _ => {}
            }
        }
        if !stack.is_empty() {
            return Err(self.err(self.text.len(), "unexpected end of document"));
        }
        Ok(EventLog { traces })
    }

    fn store(&self, stack: &mut [Frame], parsed: Option<(String, AttributeValue)>) {
        let Some((k, v)) = parsed else { return };
        match stack.last_mut() {
            Some(Frame::Event(e)) => {
                e.attributes.insert(k, v);
            }
            Some(Frame::Trace(t)) => {
                t.attributes.insert(k, v);
            }
            _ => {}
        }
    }
}

/// Reads an XES file (optionally gzip-compressed).
pub fn load_xes(path: impl AsRef<Path>) -> Result<EventLog, LogError> {
    let path = path.as_ref();
    let text = read_maybe_gz(path)?;
    parse_xes(&text, path)
}

/// Parses XES from an in-memory string; `origin` is used only in error messages.
pub fn parse_xes(text: &str, origin: &Path) -> Result<EventLog, LogError> {
    XesReader { path: origin, text }.read()
}

fn xml_escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}

fn write_attr(out: &mut String, indent: &str, key: &str, v: &AttributeValue) {
    let (tag, val) = match v {
        AttributeValue::Text(s) => ("string", s.clone()),
        AttributeValue::Number(x) => ("float", format!("{x:?}")),
        AttributeValue::Boolean(b) => ("boolean", b.to_string()),
        AttributeValue::Timestamp(t) => {
            let dt = Utc.timestamp_millis_opt(*t).single().unwrap_or_default();
            ("date", dt.format("%Y-%m-%dT%H:%M:%S%.3f+00:00").to_string())
        }
        AttributeValue::Undefined => return,
    };
    out.push_str(&format!(
        "{indent}<{tag} key=\"{}\" value=\"{}\"/>\n",
        xml_escape(key),
        xml_escape(&val)
    ));
}

/// Serializes a log to XES text. Trace ids are written as the trace's concept:name.
pub fn to_xes_string(log: &EventLog) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<log xes.version=\"1.0\">\n");
    for t in &log.traces {
        out.push_str("  <trace>\n");
        let mut attrs = t.attributes.clone();
        attrs.insert("concept:name".into(), AttributeValue::Text(t.id.clone()));
        for (k, v) in &attrs {
            write_attr(&mut out, "    ", k, v);
        }
        for e in &t.events {
            out.push_str("    <event>\n");
            for (k, v) in &e.attributes {
                write_attr(&mut out, "      ", k, v);
            }
            out.push_str("    </event>\n");
        }
        out.push_str("  </trace>\n");
    }
    out.push_str("</log>\n");
    out
}

pub fn write_xes(log: &EventLog, path: impl AsRef<Path>) -> Result<(), LogError> {
    let path = path.as_ref();
    fs::write(path, to_xes_string(log)).map_err(|e| io_err(path, e))
}

/// Column roles for CSV ingestion.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CsvMapping {
    pub case_column: String,
    pub timestamp_column: String,
    /// `"rfc3339"`, `"ms"` (integer epoch millis) or a chrono format string.
    #[serde(default = "default_ts_format")]
    pub timestamp_format: String,
}

fn default_ts_format() -> String {
    "rfc3339".to_string()
}

impl Default for CsvMapping {
    fn default() -> Self {
        CsvMapping {
            case_column: "case".into(),
            timestamp_column: "time:timestamp".into(),
            timestamp_format: default_ts_format(),
        }
    }
}

fn parse_ts(s: &str, format: &str) -> Option<i64> {
    match format {
        "rfc3339" | "iso8601" => parse_iso_millis(s),
        "ms" => s.trim().parse::<i64>().ok(),
        fmt => {
            if let Ok(dt) = DateTime::parse_from_str(s.trim(), fmt) {
                return Some(dt.with_timezone(&Utc).timestamp_millis());
            }
            NaiveDateTime::parse_from_str(s.trim(), fmt)
                .ok()
                .map(|dt| Utc.from_utc_datetime(&dt).timestamp_millis())
        }
    }
}

fn infer_cell(s: &str) -> Option<AttributeValue> {
    if s.is_empty() {
        return None;
    }
    if let Ok(x) = s.parse::<f64>() {
        if x.is_finite() {
            return Some(AttributeValue::Number(x));
        }
    }
    match s {
        "true" => Some(AttributeValue::Boolean(true)),
        "false" => Some(AttributeValue::Boolean(false)),
        _ => Some(AttributeValue::Text(s.to_string())),
    }
}

/// Reads a CSV event table. Rows are grouped by case (first-appearance order) and
/// stably sorted by timestamp within each case. The timestamp is stored under
/// `time:timestamp`; empty cells become missing attributes.
pub fn load_csv(path: impl AsRef<Path>, mapping: &CsvMapping) -> Result<EventLog, LogError> {
    let path = path.as_ref();
    let fmt_err = |line: usize, message: String| LogError::Format {
        path: path.display().to_string(),
        line,
        column: 1,
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(path, io),
        other => fmt_err(1, format!("{other:?}")),
    })?;
    let headers = rdr.headers().map_err(|e| fmt_err(1, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| fmt_err(1, format!("missing column {name:?}")))
    };
    let case_i = col(&mapping.case_column)?;
    let ts_i = col(&mapping.timestamp_column)?;

    let mut order: Vec<String> = Vec::new();
    type Row = (i64, BTreeMap<String, AttributeValue>);
    let mut groups: HashMap<String, Vec<Row>> = HashMap::new();
    for (row_no, rec) in rdr.records().enumerate() {
        let line = row_no + 2;
        let rec = rec.map_err(|e| fmt_err(line, e.to_string()))?;
        let case = rec.get(case_i).unwrap_or("").to_string();
        let raw_ts = rec.get(ts_i).unwrap_or("");
        let ts = parse_ts(raw_ts, &mapping.timestamp_format)
            .ok_or_else(|| fmt_err(line, format!("unparsable timestamp {raw_ts:?}")))?;
        let mut attrs = BTreeMap::new();
        for (i, (h, cell)) in headers.iter().zip(rec.iter()).enumerate() {
            if i == case_i {
                continue;
            }
            if i == ts_i {
                attrs.insert("time:timestamp".to_string(), AttributeValue::Timestamp(ts));
            } else if let Some(v) = infer_cell(cell) {
                attrs.insert(h.to_string(), v);
            }
        }
        groups
            .entry(case.clone())
            .or_insert_with(|| {
                order.push(case);
                Vec::new()
            })
            .push((ts, attrs));
    }
    let traces = order
        .into_iter()
        .map(|id| {
            let mut rows = groups.remove(&id).unwrap_or_default();
            rows.sort_by_key(|(ts, _)| *ts);
            Trace::new(id, rows.into_iter().map(|(_, a)| a).collect())
        })
        .collect();
    Ok(EventLog { traces })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(s: &str) -> AttributeValue {
        AttributeValue::Text(s.into())
    }

    fn example1() -> Trace {
        let names = ["e3", "e7", "e6", "e4", "e5"];
        Trace::new(
            "t",
            names
                .iter()
                .map(|n| {
                    let mut m = BTreeMap::new();
                    m.insert("id".to_string(), text(n));
                    if *n == "e6" {
                        m.insert("org:resource".to_string(), text("Bob"));
                    }
                    m
                })
                .collect(),
        )
    }

    #[test]
    fn positional_access_follows_trace_order() {
        let t = example1();
        assert_eq!(t.len(), 5);
        assert_eq!(t.attribute(3, "id"), &text("e6"));
        let p: Vec<_> = t.prefix(2).iter().map(|e| e.get("id").render()).collect();
        assert_eq!(p, ["e3", "e7"]);
    }

    #[test]
    fn missing_and_out_of_range_are_undefined() {
        let t = example1();
        assert_eq!(t.attribute(3, "org:resource"), &text("Bob"));
        assert!(t.attribute(3, "org:group").is_undefined());
        assert!(t.attribute(6, "id").is_undefined());
        assert!(t.attribute(0, "id").is_undefined());
        assert!(t.attribute(-4, "id").is_undefined());
    }

    #[test]
    fn epoch_date() {
        assert_eq!(parse_iso_millis("1970-01-01T00:00:00.000+00:00"), Some(0));
        assert_eq!(parse_iso_millis("1970-01-01T01:00:00.000+01:00"), Some(0));
        assert_eq!(parse_iso_millis("1970-01-01T00:00:01.5"), Some(1500));
    }

    #[test]
    fn xes_kinds_and_positions() {
        let doc = r#"<?xml version="1.0"?>
<log>
  <trace>
    <string key="concept:name" value="case-1"/>
    <event>
      <string key="concept:name" value="a"/>
      <int key="cost" value="3"/>
      <boolean key="ok" value="true"/>
      <date key="time:timestamp" value="1970-01-01T00:00:00.000+00:00"/>
      <list key="ignored"><string key="x" value="y"/></list>
    </event>
    <event><float key="cost" value="2.5"/></event>
    <event/>
  </trace>
</log>"#;
        let log = parse_xes(doc, Path::new("mem")).unwrap();
        assert_eq!(log.traces.len(), 1);
        let t = &log.traces[0];
        assert_eq!(t.id, "case-1");
        assert_eq!(t.len(), 3);
        assert_eq!(t.attribute(1, "cost"), &AttributeValue::Number(3.0));
        assert_eq!(t.attribute(1, "ok"), &AttributeValue::Boolean(true));
        assert_eq!(t.attribute(1, "time:timestamp"), &AttributeValue::Timestamp(0));
        assert!(t.attribute(1, "ignored").is_undefined());
        assert!(t.attribute(1, "x").is_undefined());
        assert_eq!(t.attribute(2, "cost"), &AttributeValue::Number(2.5));
        assert_eq!(t.events[2].ordinal, 3);
    }

    #[test]
    fn xes_errors_carry_position() {
        let doc = "<log>\n<trace><event>\n<weird key=\"a\" value=\"b\"/></event></trace></log>";
        match parse_xes(doc, Path::new("m")) {
            Err(LogError::Format { line, column, .. }) => assert_eq!((line, column), (3, 1)),
            other => panic!("{other:?}"),
        }
        let doc = "<log><trace><event><date key=\"t\" value=\"yesterday\"/></event></trace></log>";
        assert!(matches!(parse_xes(doc, Path::new("m")), Err(LogError::Format { .. })));
        assert!(matches!(
            parse_xes("<log><trace>", Path::new("m")),
            Err(LogError::Format { .. })
        ));
    }

    #[test]
    fn xes_round_trip() {
        let mut t = example1();
        t.events[0]
            .attributes
            .insert("time:timestamp".into(), AttributeValue::Timestamp(1_234_567));
        t.events[1]
            .attributes
            .insert("cost".into(), AttributeValue::Number(0.1 + 0.2));
        t.events[2]
            .attributes
            .insert("flag".into(), AttributeValue::Boolean(false));
        t.events[3].attributes.insert("q".into(), text("a<b & \"c\""));
        let log = EventLog::new(vec![t]);
        let back = parse_xes(&to_xes_string(&log), Path::new("m")).unwrap();
        assert_eq!(back.traces[0].events, log.traces[0].events);
    }

    #[test]
    fn csv_grouping_and_sorting() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.csv");
        fs::write(
            &p,
            "case,activity,ts,cost\n\
             a,x,3,1\n\
             b,y,1,\n\
             a,z,1,2\n\
             b,w,5,4\n\
             a,v,3,7\n\
             b,u,0,true\n",
        )
        .unwrap();
        let m = CsvMapping {
            case_column: "case".into(),
            timestamp_column: "ts".into(),
            timestamp_format: "ms".into(),
        };
        let log = load_csv(&p, &m).unwrap();
        // brute force: stable grouping by first appearance, stable sort by ts
        let rows = [
            ("a", "x", 3),
            ("b", "y", 1),
            ("a", "z", 1),
            ("b", "w", 5),
            ("a", "v", 3),
            ("b", "u", 0),
        ];
        for (ti, case) in ["a", "b"].iter().enumerate() {
            let mut expect: Vec<_> = rows.iter().filter(|r| r.0 == *case).collect();
            expect.sort_by_key(|r| r.2);
            let got: Vec<_> = log.traces[ti]
                .events
                .iter()
                .map(|e| e.get("activity").render())
                .collect();
            let want: Vec<_> = expect.iter().map(|r| r.1.to_string()).collect();
            assert_eq!(got, want);
        }
        assert_eq!(log.traces[0].id, "a");
        assert!(log.traces[1].attribute(2, "cost").is_undefined());
        assert_eq!(log.traces[1].attribute(1, "cost"), &AttributeValue::Boolean(true));
        assert_eq!(
            log.traces[1].attribute(3, "time:timestamp"),
            &AttributeValue::Timestamp(5)
        );

        let bad = CsvMapping {
            case_column: "nope".into(),
            ..m
        };
        assert!(matches!(load_csv(&p, &bad), Err(LogError::Format { .. })));
    }
}
