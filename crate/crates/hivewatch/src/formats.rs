//! The text formats of the simulator: line-oriented topology and rules
//! files, event and connection-record traces, and the JSON report.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use hivewatch_core::{
    validate_topology, AgentAddress, AttrValue, CmpOp, Constraint, DetectionRule, EventCategory,
    EventRecord, Fault, NodeName, Predicate, RawAgent, RawHost, RawTopology, RuleSet, ScopeNeeded,
    SignatureRule, SimReport, Topology, KDD_ATTRIBUTES, KDD_CATEGORY,
};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    /// Filesystem trouble; maps to the runtime-error exit code.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Malformed content; maps to the validation exit code.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// Well-formed content that breaks a semantic invariant.
    #[error("{0}")]
    Invalid(String),
}

fn parse_err(line: usize, msg: impl Into<String>) -> LoadError {
    LoadError::Parse { line, msg: msg.into() }
}

/// Split a line into whitespace-separated tokens, keeping double-quoted
/// spans (with their spaces) inside a single token.
fn split_tokens(line: &str) -> Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for c in line.chars() {
        match c {
            '"' => quoted = !quoted,
            c if c.is_whitespace() && !quoted => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if quoted {
        return Err("unterminated quote".into());
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    Ok(tokens)
}

fn strip_comment(line: &str) -> &str {
    // a '#' inside quotes does not start a comment
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn split_kv(token: &str) -> Option<(&str, &str)> {
    token.split_once('=')
}

fn comma_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

// ---------------------------------------------------------------------
// topology

pub fn parse_topology(text: &str) -> Result<RawTopology, LoadError> {
    let mut raw = RawTopology::default();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(line).trim();
        if line.is_empty() {
            continue;
        }
        let tokens = split_tokens(line).map_err(|m| parse_err(lineno, m))?;
        match tokens[0].as_str() {
            "domain" => {
                let [_, name] = tokens.as_slice() else {
                    return Err(parse_err(lineno, "expected `domain <id>`"));
                };
                raw.domains.push(name.clone());
            }
            "host" => {
                if tokens.len() != 3 {
                    return Err(parse_err(lineno, "expected `host <id> domain=<id>`"));
                }
                let Some(("domain", domain)) = split_kv(&tokens[2]) else {
                    return Err(parse_err(lineno, format!("host `{}` has no domain", tokens[1])));
                };
                raw.hosts.push(RawHost {
                    name: tokens[1].clone(),
                    domain: domain.to_string(),
                });
            }
            "agent" => {
                if tokens.len() < 3 {
                    return Err(parse_err(
                        lineno,
                        "expected `agent <id> host=<id> [produces=...] [rules=...]`",
                    ));
                }
                let mut host = None;
                let mut produces = Vec::new();
                let mut detects = Vec::new();
                for tok in &tokens[2..] {
                    match split_kv(tok) {
                        Some(("host", v)) => host = Some(v.to_string()),
                        Some(("produces", v)) => produces = comma_list(v),
                        Some(("rules", v)) => detects = comma_list(v),
                        _ => return Err(parse_err(lineno, format!("unknown field `{tok}`"))),
                    }
                }
                let Some(host) = host else {
                    return Err(parse_err(lineno, format!("agent `{}` has no host", tokens[1])));
                };
                raw.agents.push(RawAgent {
                    name: tokens[1].clone(),
                    host,
                    produces,
                    detects,
                });
            }
            other => return Err(parse_err(lineno, format!("unknown directive `{other}`"))),
        }
    }
    Ok(raw)
}

pub fn load_topology(path: &Path) -> Result<Topology, LoadError> {
    let text = fs::read_to_string(path)?;
    let raw = parse_topology(&text)?;
    validate_topology(&raw).map_err(|e| LoadError::Invalid(e.to_string()))
}

/// Canonical topology text; parsing it back yields an equal topology.
pub fn write_topology(topo: &Topology) -> String {
    let mut out = String::new();
    for d in &topo.domains {
        out.push_str(&format!("domain {}\n", d.domain));
    }
    for d in &topo.domains {
        for h in &d.hosts {
            out.push_str(&format!("host {} domain={}\n", h.host, d.domain));
        }
    }
    for d in &topo.domains {
        for h in &d.hosts {
            for a in &h.agents {
                out.push_str(&format!("agent {} host={}/{}", a.address.agent, d.domain, h.host));
                if !a.produces.is_empty() {
                    let cats: Vec<&str> = a.produces.iter().map(|c| c.as_str()).collect();
                    out.push_str(&format!(" produces={}", cats.join(",")));
                }
                if !a.detects.is_empty() {
                    out.push_str(&format!(" rules={}", a.detects.join(",")));
                }
                out.push('\n');
            }
        }
    }
    out
}

// ---------------------------------------------------------------------
// predicates and rules

fn parse_literal(raw: &str, quoted: bool) -> AttrValue {
    if quoted {
        return AttrValue::Text(raw.to_string());
    }
    if let Ok(i) = raw.parse::<i64>() {
        return AttrValue::Int(i);
    }
    if let Ok(r) = raw.parse::<f64>() {
        return AttrValue::Real(r);
    }
    AttrValue::Text(raw.to_string())
}

fn parse_op(raw: &str) -> Option<CmpOp> {
    match raw {
        "=" => Some(CmpOp::Eq),
        "!=" => Some(CmpOp::Ne),
        "<" => Some(CmpOp::Lt),
        "<=" => Some(CmpOp::Le),
        ">" => Some(CmpOp::Gt),
        ">=" => Some(CmpOp::Ge),
        "eq" => Some(CmpOp::TextEq),
        "prefix" => Some(CmpOp::TextPrefix),
        _ => None,
    }
}

/// Parse `attr op literal [&& attr op literal ...]`; the empty string is
/// the always-true predicate.
pub fn parse_predicate(text: &str) -> Result<Predicate, String> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Predicate::always());
    }
    let mut constraints = Vec::new();
    for clause in text.split("&&") {
        let clause = clause.trim();
        let parts: Vec<&str> = clause.splitn(3, char::is_whitespace).collect();
        let [attr, op, lit] = parts.as_slice() else {
            return Err(format!("malformed constraint `{clause}`; expected `attr op literal`"));
        };
        let Some(op) = parse_op(op) else {
            return Err(format!("unknown operator `{op}` in `{clause}`"));
        };
        let lit = lit.trim();
        let (raw, quoted) = match lit.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
            Some(inner) => (inner, true),
            None => (lit, false),
        };
        constraints.push(Constraint::new(*attr, op, parse_literal(raw, quoted)));
    }
    Ok(Predicate::new(constraints))
}

pub fn format_predicate(p: &Predicate) -> String {
    let clauses: Vec<String> = p
        .constraints
        .iter()
        .map(|c| {
            let lit = match &c.literal {
                AttrValue::Int(i) => format!("{i}"),
                AttrValue::Real(r) => format!("{r:?}"),
                AttrValue::Text(s) => format!("\"{s}\""),
            };
            format!("{} {} {}", c.attribute, c.op, lit)
        })
        .collect();
    clauses.join(" && ")
}

pub fn parse_rules(text: &str) -> Result<RuleSet, LoadError> {
    let mut rules = RuleSet::default();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(line).trim();
        if line.is_empty() {
            continue;
        }
        let tokens = split_tokens(line).map_err(|m| parse_err(lineno, m))?;
        let mut rule_id = None;
        let mut category = None;
        let mut predicate = Predicate::always();
        let mut window = None;
        let mut threshold = None;
        let mut scope = None;
        let mut class = None;
        let mut kind_signature = false;
        for tok in &tokens {
            let Some((key, value)) = split_kv(tok) else {
                return Err(parse_err(lineno, format!("expected key=value, got `{tok}`")));
            };
            match key {
                "rule_id" => rule_id = Some(value.to_string()),
                "category" => category = Some(value.to_string()),
                "predicate" => {
                    predicate = parse_predicate(value).map_err(|m| parse_err(lineno, m))?;
                }
                "window" => {
                    window = Some(value.parse::<f64>().map_err(|_| {
                        parse_err(lineno, format!("bad window `{value}`"))
                    })?);
                }
                "threshold" => {
                    threshold = Some(value.parse::<u64>().map_err(|_| {
                        parse_err(lineno, format!("bad threshold `{value}`"))
                    })?);
                }
                "scope" => {
                    scope = Some(match value.to_ascii_lowercase().as_str() {
                        "local" => ScopeNeeded::Local,
                        "domain" => ScopeNeeded::Domain,
                        "enterprise" => ScopeNeeded::Enterprise,
                        _ => return Err(parse_err(lineno, format!("unknown scope `{value}`"))),
                    });
                }
                "class" => {
                    class = Some(
                        hivewatch_core::AlertClass::parse(value)
                            .ok_or_else(|| parse_err(lineno, format!("unknown class `{value}`")))?,
                    );
                }
                "kind" => match value {
                    "signature" => kind_signature = true,
                    "detection" => kind_signature = false,
                    _ => return Err(parse_err(lineno, format!("unknown kind `{value}`"))),
                },
                _ => return Err(parse_err(lineno, format!("unknown field `{key}`"))),
            }
        }
        let rule_id = rule_id.ok_or_else(|| parse_err(lineno, "missing rule_id"))?;
        let class = class.ok_or_else(|| parse_err(lineno, "missing class"))?;
        if kind_signature {
            if window.is_some() || threshold.is_some() || scope.is_some() {
                return Err(parse_err(
                    lineno,
                    "signature rules carry no window/threshold/scope",
                ));
            }
            rules.signatures.push(SignatureRule {
                rule_id,
                predicate,
                class,
            });
        } else {
            let category = category.ok_or_else(|| parse_err(lineno, "missing category"))?;
            rules.detection.push(DetectionRule {
                rule_id,
                category: EventCategory::new(category),
                predicate,
                window: window.ok_or_else(|| parse_err(lineno, "missing window"))?,
                threshold: threshold.ok_or_else(|| parse_err(lineno, "missing threshold"))?,
                scope_needed: scope.ok_or_else(|| parse_err(lineno, "missing scope"))?,
                alert_class: class,
            });
        }
    }
    Ok(rules)
}

pub fn load_rules(path: &Path) -> Result<RuleSet, LoadError> {
    parse_rules(&fs::read_to_string(path)?)
}

pub fn write_rules(rules: &RuleSet) -> String {
    let mut out = String::new();
    for r in &rules.detection {
        out.push_str(&format!(
            "rule_id={} category={} predicate=\"{}\" window={} threshold={} scope={} class={}\n",
            r.rule_id,
            r.category,
            format_predicate(&r.predicate),
            r.window,
            r.threshold,
            r.scope_needed,
            r.alert_class,
        ));
    }
    for r in &rules.signatures {
        out.push_str(&format!(
            "rule_id={} kind=signature category=kdd.connection predicate=\"{}\" class={}\n",
            r.rule_id,
            format_predicate(&r.predicate),
            r.class,
        ));
    }
    out
}

// ---------------------------------------------------------------------
// traces

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Kdd,
    Event,
}

const EVENT_HEADER: [&str; 4] = ["time", "host", "agent", "category"];

/// Decide the trace format from the path extension, falling back to the
/// first content line: an event trace announces itself with its header, a
/// connection-record trace has 42 comma-separated fields.
pub fn detect_format(path: &Path, text: &str) -> Result<TraceFormat, LoadError> {
    if path.extension().is_some_and(|e| e == "kdd") {
        return Ok(TraceFormat::Kdd);
    }
    let first = text
        .lines()
        .map(strip_comment)
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or_else(|| parse_err(1, "empty trace file"))?;
    let fields: Vec<&str> = first.split(',').collect();
    if fields.len() >= EVENT_HEADER.len()
        && fields[..EVENT_HEADER.len()]
            .iter()
            .map(|s| s.trim())
            .eq(EVENT_HEADER)
    {
        Ok(TraceFormat::Event)
    } else if fields.len() == KDD_ATTRIBUTES.len() + 1 {
        Ok(TraceFormat::Kdd)
    } else {
        Err(parse_err(
            1,
            "not a trace: expected the time,host,agent,category header or 42-field records",
        ))
    }
}

pub fn parse_event_trace(text: &str, topo: &Topology) -> Result<Vec<EventRecord>, LoadError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l).trim()))
        .filter(|(_, l)| !l.is_empty());
    let Some((header_line, header)) = lines.next() else {
        return Err(parse_err(1, "missing header"));
    };
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if columns.len() < EVENT_HEADER.len() || columns[..EVENT_HEADER.len()] != EVENT_HEADER {
        return Err(parse_err(
            header_line,
            "header must start with time,host,agent,category",
        ));
    }
    let attr_names = &columns[EVENT_HEADER.len()..];

    let mut records = Vec::new();
    let mut prev_time = f64::NEG_INFINITY;
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        let time: f64 = fields[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad time `{}`", fields[0])))?;
        if time < prev_time {
            return Err(parse_err(lineno, "event times must be non-decreasing"));
        }
        prev_time = time;
        let (domain, host) = match fields[1].split_once('/') {
            Some((d, h)) => (d.to_string(), h.to_string()),
            None => {
                let (d, h) = topo
                    .resolve_host(fields[1])
                    .map_err(|e| parse_err(lineno, e.to_string()))?;
                (d.to_string(), h.to_string())
            }
        };
        let source = AgentAddress::new(domain, host, fields[2]);
        if topo.agent(&source).is_none() {
            return Err(parse_err(lineno, format!("unknown agent `{source}`")));
        }
        if fields[3].is_empty() {
            return Err(parse_err(lineno, "empty category"));
        }
        let mut attributes = Vec::new();
        for (name, value) in attr_names.iter().zip(&fields[EVENT_HEADER.len()..]) {
            if !value.is_empty() {
                attributes.push((name.clone(), parse_literal(value, false)));
            }
        }
        records.push(EventRecord {
            seq: records.len() as u64,
            time,
            source,
            category: EventCategory::new(fields[3]),
            attributes,
        });
    }
    Ok(records)
}

pub fn parse_kdd_trace(text: &str) -> Result<Vec<EventRecord>, LoadError> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != KDD_ATTRIBUTES.len() + 1 {
            return Err(parse_err(
                lineno,
                format!(
                    "expected {} comma-separated fields, found {}",
                    KDD_ATTRIBUTES.len() + 1,
                    fields.len()
                ),
            ));
        }
        let seq = records.len() as u64;
        let mut attributes: Vec<(String, AttrValue)> = KDD_ATTRIBUTES
            .iter()
            .zip(&fields)
            .map(|(name, value)| (name.to_string(), parse_literal(value, false)))
            .collect();
        let label = fields[KDD_ATTRIBUTES.len()].trim_end_matches('.');
        if label.is_empty() {
            return Err(parse_err(lineno, "empty class label"));
        }
        attributes.push(("label".to_string(), AttrValue::Text(label.to_string())));
        records.push(EventRecord {
            seq,
            time: seq as f64 * 0.001,
            source: AgentAddress::new("unassigned", "unassigned", "unassigned"),
            category: EventCategory::new(KDD_CATEGORY),
            attributes,
        });
    }
    Ok(records)
}

pub fn load_trace(
    path: &Path,
    topo: &Topology,
) -> Result<(Vec<EventRecord>, TraceFormat), LoadError> {
    let text = fs::read_to_string(path)?;
    match detect_format(path, &text)? {
        TraceFormat::Event => Ok((parse_event_trace(&text, topo)?, TraceFormat::Event)),
        TraceFormat::Kdd => Ok((parse_kdd_trace(&text)?, TraceFormat::Kdd)),
    }
}

fn format_value(v: &AttrValue) -> String {
    match v {
        AttrValue::Int(i) => format!("{i}"),
        AttrValue::Real(r) => format!("{r:?}"),
        AttrValue::Text(s) => s.clone(),
    }
}

/// Event-format text for a record list; attribute columns are the sorted
/// union of every record's attribute names.
pub fn write_event_trace(records: &[EventRecord]) -> String {
    let mut names: Vec<String> = Vec::new();
    for e in records {
        for (n, _) in &e.attributes {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
    }
    names.sort();
    let mut out = String::new();
    out.push_str("time,host,agent,category");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for e in records {
        out.push_str(&format!(
            "{:.6},{}/{},{},{}",
            e.time, e.source.domain, e.source.host, e.source.agent, e.category
        ));
        for n in &names {
            out.push(',');
            if let Some(v) = e.attr(n) {
                out.push_str(&format_value(v));
            }
        }
        out.push('\n');
    }
    out
}

/// Connection-record text: 41 attribute fields plus the label.
pub fn write_kdd_trace(records: &[EventRecord]) -> String {
    let mut out = String::new();
    for e in records {
        let mut fields: Vec<String> = Vec::with_capacity(KDD_ATTRIBUTES.len() + 1);
        for name in KDD_ATTRIBUTES {
            fields.push(e.attr(name).map(format_value).unwrap_or_default());
        }
        let label = match e.attr("label") {
            Some(AttrValue::Text(l)) => format!("{l}."),
            _ => String::new(),
        };
        fields.push(label);
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------
// faults and reports

/// Parse `node@time`, e.g. `dca:lan2@0` or `wca:lan1/web@12.5`.
pub fn parse_fault(s: &str) -> Result<Fault, String> {
    let (node, time) = s
        .rsplit_once('@')
        .ok_or_else(|| format!("fault `{s}` must be NODE@TIME"))?;
    let time: f64 = time.parse().map_err(|_| format!("bad fault time `{time}`"))?;
    if time < 0.0 {
        return Err(format!("fault time must be non-negative, got {time}"));
    }
    let node: NodeName = node.parse()?;
    Ok(Fault { time, node })
}

pub fn read_report(path: &Path) -> Result<SimReport, LoadError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| LoadError::Invalid(format!("bad report: {e}")))
}

/// Write the report atomically: a temp file in the target directory is
/// renamed over the destination.
pub fn write_report(path: &Path, report: &SimReport) -> Result<(), LoadError> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| LoadError::Invalid(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), std::io::Error> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = match dir {
        Some(d) => d.join(format!(".{file_name}.tmp")),
        None => PathBuf::from(format!(".{file_name}.tmp")),
    };
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
