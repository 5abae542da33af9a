//! Plain-text model files.
//!
//! ```text
//! ctxrec-model 1
//! model = dev-global
//!
//! [schema]
//! dimension = Time weekend weekday
//! [users]
//! label = u1
//! [items]
//! label = t1
//! [mf]
//! mu = 3.5
//! rank = 2
//! [mf.users]
//! u1 = <bias> <factor 1> <factor 2>
//! [mf.items]
//! t1 = <bias> <factor 1> <factor 2>
//! [dev]
//! granularity = global
//! Time:weekend = 0.5
//! ```
//!
//! Deviation models add a `dev` section keyed `dimension:condition`, with
//! `:user` or `:item` appended for non-zero entity offsets. Similarity models
//! add `ics` (`dimension:a:b` pair entries plus `observed` keys), `lcs`
//! (`rank`, then one vector per `dimension:condition`) or `mcs` (`alpha`,
//! then one coordinate per condition). CP models use `cp`, `cp.users`,
//! `cp.items` and `cp.conditions`. The pre-filter stores its global model in
//! `mf` and each local model as `prefilter.local` (with a `context` key
//! listing one condition per dimension) followed by its own `.users` and
//! `.items` sections.
//!
//! Labels are percent-escaped outside `[A-Za-z0-9_.+/@!-]`. Numbers use the
//! shortest representation that parses back to the same bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::cp::CpModel;
use crate::data::{ContextSchema, ContextSituation, Vocabulary};
use crate::deviation::{DeviationModel, Granularity};
use crate::error::{Error, Result};
use crate::eval::PrefilterModel;
use crate::mf::MfParams;
use crate::models::{ModelKind, TrainedModel};
use crate::similarity::{Backend, IcsParams, LcsParams, McsParams, SimilarityModel};

const MAGIC: &str = "ctxrec-model";
const VERSION: u32 = 1;

/// A trained model together with the vocabularies its indices refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub schema: ContextSchema,
    pub users: Vocabulary,
    pub items: Vocabulary,
    pub model: TrainedModel,
}

impl SavedModel {
    /// Translates a situation from another schema by condition label.
    pub fn translate_situation(&self, from: &ContextSchema, situation: &ContextSituation) -> Result<ContextSituation> {
        let mut out = self.schema.anchor();
        for (d, &c) in situation.0.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let src = from.dimension(d);
            let label = src.condition_label(c).unwrap_or("?");
            let (di, dim) = self
                .schema
                .dimension_index(src.name())
                .map(|i| (i, self.schema.dimension(i)))
                .ok_or_else(|| Error::InvalidArgument(format!("model has no dimension {:?}", src.name())))?;
            out.0[di] = dim.condition(label).ok_or_else(|| {
                Error::InvalidArgument(format!("model has no condition {}={label}", src.name()))
            })?;
        }
        Ok(out)
    }
}

fn escape(label: &str) -> String {
    let mut s = String::with_capacity(label.len());
    for b in label.bytes() {
        if b.is_ascii_alphanumeric() || b"_.+/@!-".contains(&b) {
            s.push(b as char);
        } else {
            let _ = write!(s, "%{b:02X}");
        }
    }
    if s.is_empty() {
        s.push('%');
    }
    s
}

fn unescape(text: &str, line: u64) -> Result<String> {
    if text == "%" {
        return Ok(String::new());
    }
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = text
                .get(i + 1..i + 3)
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| Error::format(Some(line), format!("bad escape in {text:?}")))?;
            out.push(hex);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| Error::format(Some(line), format!("invalid UTF-8 in {text:?}")))
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn nums(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ")
}

struct Out {
    text: String,
}

impl Out {
    fn section(&mut self, name: &str) {
        let _ = writeln!(self.text, "[{name}]");
    }

    fn kv(&mut self, key: &str, value: impl AsRef<str>) {
        let _ = writeln!(self.text, "{key} = {}", value.as_ref());
    }
}

fn cond_key(schema: &ContextSchema, dim: usize, cond: u32) -> String {
    let d = schema.dimension(dim);
    format!(
        "{}:{}",
        escape(d.name()),
        escape(d.condition_label(cond).unwrap_or_default())
    )
}

fn write_mf(o: &mut Out, prefix: &str, m: &MfParams, users: &Vocabulary, items: &Vocabulary, extra: &[(&str, String)]) {
    o.section(prefix);
    for (k, v) in extra {
        o.kv(k, v);
    }
    o.kv("mu", num(m.mu()));
    o.kv("rank", m.rank().to_string());
    o.section(&format!("{prefix}.users"));
    for u in 0..m.user_count() as u32 {
        let mut v = vec![m.user_bias(u)];
        v.extend_from_slice(m.user_factors(u));
        o.kv(&escape(users.label(u).unwrap_or_default()), nums(&v));
    }
    o.section(&format!("{prefix}.items"));
    for t in 0..m.item_count() as u32 {
        let mut v = vec![m.item_bias(t)];
        v.extend_from_slice(m.item_factors(t));
        o.kv(&escape(items.label(t).unwrap_or_default()), nums(&v));
    }
}

/// Serializes `saved` in the versioned text format.
pub fn write_model<W: Write>(saved: &SavedModel, mut sink: W) -> Result<()> {
    let SavedModel { schema, users, items, model } = saved;
    let mut o = Out { text: String::new() };
    let _ = writeln!(o.text, "{MAGIC} {VERSION}");
    o.kv("model", model.kind().name());
    o.section("schema");
    for d in schema.dimensions() {
        let mut parts = vec![escape(d.name())];
        parts.extend(d.conditions()[1..].iter().map(|c| escape(c)));
        o.kv("dimension", parts.join(" "));
    }
    o.section("users");
    for l in users.labels() {
        o.kv("label", escape(l));
    }
    o.section("items");
    for l in items.labels() {
        o.kv("label", escape(l));
    }

    match model {
        TrainedModel::Mf(m) => write_mf(&mut o, "mf", m, users, items, &[]),
        TrainedModel::Deviation(m) => {
            write_mf(&mut o, "mf", m.base(), users, items, &[]);
            o.section("dev");
            o.kv("granularity", m.granularity().to_string());
            let entities = match m.granularity() {
                Granularity::PerItem => items,
                _ => users,
            };
            for d in 0..m.dimension_count() {
                for c in 1..m.condition_count(d) as u32 {
                    let key = cond_key(schema, d, c);
                    o.kv(&key, num(m.global_deviation(d, c)));
                    for e in 0..m.entity_count() as u32 {
                        let v = m.offset(d, c, e);
                        if v != 0.0 {
                            o.kv(&format!("{key}:{}", escape(entities.label(e).unwrap_or_default())), num(v));
                        }
                    }
                }
            }
        }
        TrainedModel::Similarity(m) => {
            write_mf(&mut o, "mf", m.base(), users, items, &[]);
            match m.backend() {
                Backend::Ics(p) => {
                    o.section("ics");
                    for d in 0..p.dimension_count() {
                        let n = p.condition_count(d) as u32;
                        for c in 1..n {
                            if p.is_observed(d, c) {
                                o.kv("observed", cond_key(schema, d, c));
                            }
                        }
                        for a in 0..n {
                            for b in a + 1..n {
                                let label = schema.dimension(d).condition_label(b).unwrap_or_default();
                                o.kv(&format!("{}:{}", cond_key(schema, d, a), escape(label)), num(p.entry(d, a, b)));
                            }
                        }
                    }
                }
                Backend::Lcs(p) => {
                    o.section("lcs");
                    o.kv("rank", p.rank().to_string());
                    for (d, dim) in schema.dimensions().iter().enumerate() {
                        for c in 0..dim.len() as u32 {
                            o.kv(&cond_key(schema, d, c), nums(p.vector(d, c)));
                        }
                    }
                }
                Backend::Mcs(p) => {
                    o.section("mcs");
                    o.kv("alpha", num(p.alpha()));
                    for (d, dim) in schema.dimensions().iter().enumerate() {
                        for c in 0..dim.len() as u32 {
                            o.kv(&cond_key(schema, d, c), num(p.coordinate(d, c)));
                        }
                    }
                }
            }
        }
        TrainedModel::Cp(m) => {
            o.section("cp");
            o.kv("mu", num(m.mu()));
            o.kv("rank", m.rank().to_string());
            o.section("cp.users");
            for u in 0..m.user_count() as u32 {
                o.kv(&escape(users.label(u).unwrap_or_default()), nums(m.user_vector(u)));
            }
            o.section("cp.items");
            for t in 0..m.item_count() as u32 {
                o.kv(&escape(items.label(t).unwrap_or_default()), nums(m.item_vector(t)));
            }
            o.section("cp.conditions");
            for (d, dim) in schema.dimensions().iter().enumerate() {
                for c in 0..dim.len() as u32 {
                    o.kv(&cond_key(schema, d, c), nums(m.condition_vector(d, c)));
                }
            }
        }
        TrainedModel::Prefilter(m) => {
            write_mf(&mut o, "mf", m.global(), users, items, &[]);
            o.section("prefilter");
            o.kv("floor", m.floor().to_string());
            for (ctx, local) in m.local_models() {
                let labels: Vec<String> = ctx
                    .0
                    .iter()
                    .enumerate()
                    .map(|(d, &c)| escape(schema.dimension(d).condition_label(c).unwrap_or_default()))
                    .collect();
                write_mf(&mut o, "prefilter.local", local, users, items, &[("context", labels.join(" "))]);
            }
        }
    }
    sink.write_all(o.text.as_bytes())?;
    Ok(())
}

struct Entry {
    line: u64,
    key: String,
    value: String,
}

struct Section {
    name: String,
    line: u64,
    entries: Vec<Entry>,
}

impl Section {
    fn get(&self, key: &str) -> Result<&Entry> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .ok_or_else(|| Error::format(Some(self.line), format!("section [{}] lacks {key:?}", self.name)))
    }
}

fn parse_num<T: std::str::FromStr>(e: &Entry) -> Result<T> {
    e.value
        .trim()
        .parse()
        .map_err(|_| Error::value(Some(e.line), format!("bad number {:?} for {:?}", e.value, e.key)))
}

fn parse_vec(e: &Entry, len: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = e
        .value
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::value(Some(e.line), format!("bad number {s:?}"))))
        .collect::<Result<_>>()?;
    if v.len() != len {
        return Err(Error::value(
            Some(e.line),
            format!("expected {len} values for {:?}, found {}", e.key, v.len()),
        ));
    }
    Ok(v)
}

struct Cursor {
    sections: Vec<Section>,
    pos: usize,
}

impl Cursor {
    fn next(&mut self, name: &str) -> Result<&Section> {
        let s = self
            .sections
            .get(self.pos)
            .ok_or_else(|| Error::format(None, format!("missing section [{name}]")))?;
        if s.name != name {
            return Err(Error::format(Some(s.line), format!("expected section [{name}], found [{}]", s.name)));
        }
        self.pos += 1;
        Ok(&self.sections[self.pos - 1])
    }

    fn peek(&self) -> Option<&str> {
        self.sections.get(self.pos).map(|s| s.name.as_str())
    }
}

fn lookup_condition(schema: &ContextSchema, dim: &str, cond: &str, line: u64) -> Result<(usize, u32)> {
    let d = schema
        .dimension_index(dim)
        .ok_or_else(|| Error::format(Some(line), format!("unknown dimension {dim:?}")))?;
    let c = schema
        .dimension(d)
        .condition(cond)
        .ok_or_else(|| Error::format(Some(line), format!("unknown condition {dim}:{cond}")))?;
    Ok((d, c))
}

/// Splits an escaped `a:b[:c]` key into unescaped parts.
fn key_parts(e: &Entry) -> Result<Vec<String>> {
    e.key.split(':').map(|p| unescape(p, e.line)).collect()
}

fn read_keyed<'a>(s: &'a Section, vocab: &Vocabulary) -> Result<Vec<(u32, &'a Entry)>> {
    s.entries
        .iter()
        .map(|e| {
            let label = unescape(&e.key, e.line)?;
            let id = vocab
                .get(&label)
                .ok_or_else(|| Error::format(Some(e.line), format!("unknown label {label:?}")))?;
            Ok((id, e))
        })
        .collect()
}

fn read_mf(c: &mut Cursor, prefix: &str, users: &Vocabulary, items: &Vocabulary) -> Result<MfParams> {
    let head = c.next(prefix)?;
    let mu = parse_num(head.get("mu")?)?;
    let rank: usize = parse_num(head.get("rank")?)?;
    let mut m = MfParams::zeros(mu, users.len(), items.len(), rank);
    for (u, e) in read_keyed(c.next(&format!("{prefix}.users"))?, users)? {
        let v = parse_vec(e, rank + 1)?;
        m.set_user_bias(u, v[0]);
        m.user_factors_mut(u).copy_from_slice(&v[1..]);
    }
    for (t, e) in read_keyed(c.next(&format!("{prefix}.items"))?, items)? {
        let v = parse_vec(e, rank + 1)?;
        m.set_item_bias(t, v[0]);
        m.item_factors_mut(t).copy_from_slice(&v[1..]);
    }
    Ok(m)
}

fn parse_sections(text: &str) -> Result<(Vec<Entry>, Vec<Section>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l.trim()));
    let header = lines
        .by_ref()
        .find(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| Error::format(None, "empty model file"))?;
    let version = header
        .1
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::format(Some(header.0), "not a model file"))?;
    if version != VERSION.to_string() {
        return Err(Error::format(Some(header.0), format!("unsupported model file version {version}")));
    }
    let mut preamble = Vec::new();
    let mut sections: Vec<Section> = Vec::new();
    for (line, l) in lines {
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            sections.push(Section {
                name: name.trim().to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = l
            .split_once('=')
            .ok_or_else(|| Error::format(Some(line), format!("expected key = value, found {l:?}")))?;
        let entry = Entry {
            line,
            key: key.trim().to_string(),
            value: value.trim().to_string(),
        };
        match sections.last_mut() {
            Some(s) => s.entries.push(entry),
            None => preamble.push(entry),
        }
    }
    Ok((preamble, sections))
}

fn read_labels(s: &Section) -> Result<Vocabulary> {
    let mut v = Vocabulary::new();
    for e in &s.entries {
        v.intern(&unescape(&e.value, e.line)?);
    }
    Ok(v)
}

/// Parses a model written by [`write_model`].
pub fn read_model<R: Read>(mut source: R) -> Result<SavedModel> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let (preamble, sections) = parse_sections(&text)?;
    let kind_entry = preamble
        .iter()
        .find(|e| e.key == "model")
        .ok_or_else(|| Error::format(None, "missing model kind"))?;
    let kind: ModelKind = kind_entry
        .value
        .parse()
        .map_err(|e: Error| Error::format(Some(kind_entry.line), e.to_string()))?;
    let mut c = Cursor { sections, pos: 0 };

    let mut dims: Vec<(String, Vec<String>)> = Vec::new();
    for e in &c.next("schema")?.entries {
        let mut parts = e.value.split_whitespace().map(|p| unescape(p, e.line));
        let name = parts
            .next()
            .ok_or_else(|| Error::format(Some(e.line), "dimension without a name"))??;
        dims.push((name, parts.collect::<Result<_>>()?));
    }
    let schema = ContextSchema::with_conditions(&dims)?;
    let users = read_labels(c.next("users")?)?;
    let items = read_labels(c.next("items")?)?;

    let model = match kind {
        ModelKind::Mf => TrainedModel::Mf(read_mf(&mut c, "mf", &users, &items)?),
        ModelKind::DevGlobal | ModelKind::DevUser | ModelKind::DevItem => {
            let base = read_mf(&mut c, "mf", &users, &items)?;
            let s = c.next("dev")?;
            let granularity: Granularity = s.get("granularity")?.value.parse()?;
            let entities = if granularity == Granularity::PerItem { &items } else { &users };
            let mut m = DeviationModel::new(base, &schema, granularity);
            for e in s.entries.iter().filter(|e| e.key != "granularity") {
                let parts = key_parts(e)?;
                let (d, cond) = lookup_condition(&schema, &parts[0], parts.get(1).map_or("", |s| s), e.line)?;
                let v = parse_num(e)?;
                match parts.get(2) {
                    None => m.set_global_deviation(d, cond, v),
                    Some(label) => {
                        let id = entities
                            .get(label)
                            .ok_or_else(|| Error::format(Some(e.line), format!("unknown entity {label:?}")))?;
                        m.set_offset(d, cond, id, v)
                    }
                }
                .map_err(|err| Error::format(Some(e.line), err.to_string()))?;
            }
            TrainedModel::Deviation(m)
        }
        ModelKind::SimIcs | ModelKind::SimLcs | ModelKind::SimMcs => {
            let base = read_mf(&mut c, "mf", &users, &items)?;
            let backend = match kind {
                ModelKind::SimIcs => {
                    let s = c.next("ics")?;
                    let mut p = IcsParams::ones(&schema);
                    for e in &s.entries {
                        if e.key == "observed" {
                            let parts: Vec<String> = e.value.split(':').map(|x| unescape(x, e.line)).collect::<Result<_>>()?;
                            let (d, cond) = lookup_condition(&schema, &parts[0], parts.get(1).map_or("", |s| s), e.line)?;
                            p.mark_observed(d, cond);
                            continue;
                        }
                        let parts = key_parts(e)?;
                        if parts.len() != 3 {
                            return Err(Error::format(Some(e.line), format!("bad ics key {:?}", e.key)));
                        }
                        let (d, a) = lookup_condition(&schema, &parts[0], &parts[1], e.line)?;
                        let (_, b) = lookup_condition(&schema, &parts[0], &parts[2], e.line)?;
                        p.set_entry(d, a, b, parse_num(e)?)
                            .map_err(|err| Error::format(Some(e.line), err.to_string()))?;
                    }
                    Backend::Ics(p)
                }
                ModelKind::SimLcs => {
                    let s = c.next("lcs")?;
                    let rank: usize = parse_num(s.get("rank")?)?;
                    let mut p = LcsParams::zeros(&schema, rank);
                    for e in s.entries.iter().filter(|e| e.key != "rank") {
                        let parts = key_parts(e)?;
                        let (d, cond) = lookup_condition(&schema, &parts[0], parts.get(1).map_or("", |s| s), e.line)?;
                        p.vector_mut(d, cond).copy_from_slice(&parse_vec(e, rank)?);
                    }
                    Backend::Lcs(p)
                }
                _ => {
                    let s = c.next("mcs")?;
                    let mut p = McsParams::zeros(&schema, parse_num(s.get("alpha")?)?);
                    for e in s.entries.iter().filter(|e| e.key != "alpha") {
                        let parts = key_parts(e)?;
                        let (d, cond) = lookup_condition(&schema, &parts[0], parts.get(1).map_or("", |s| s), e.line)?;
                        p.set_coordinate(d, cond, parse_num(e)?);
                    }
                    Backend::Mcs(p)
                }
            };
            TrainedModel::Similarity(SimilarityModel::new(base, backend))
        }
        ModelKind::Cp => {
            let head = c.next("cp")?;
            let mu = parse_num(head.get("mu")?)?;
            let rank: usize = parse_num(head.get("rank")?)?;
            let mut m = CpModel::zeros(mu, users.len(), items.len(), &schema, rank);
            for (u, e) in read_keyed(c.next("cp.users")?, &users)? {
                m.user_vector_mut(u).copy_from_slice(&parse_vec(e, rank)?);
            }
            for (t, e) in read_keyed(c.next("cp.items")?, &items)? {
                m.item_vector_mut(t).copy_from_slice(&parse_vec(e, rank)?);
            }
            for e in &c.next("cp.conditions")?.entries {
                let parts = key_parts(e)?;
                let (d, cond) = lookup_condition(&schema, &parts[0], parts.get(1).map_or("", |s| s), e.line)?;
                m.condition_vector_mut(d, cond).copy_from_slice(&parse_vec(e, rank)?);
            }
            TrainedModel::Cp(m)
        }
        ModelKind::Prefilter => {
            let global = read_mf(&mut c, "mf", &users, &items)?;
            let floor = parse_num(c.next("prefilter")?.get("floor")?)?;
            let mut local = BTreeMap::new();
            while c.peek() == Some("prefilter.local") {
                let ctx_entry = c.sections[c.pos].get("context")?;
                let line = ctx_entry.line;
                let labels: Vec<String> = ctx_entry
                    .value
                    .split_whitespace()
                    .map(|p| unescape(p, line))
                    .collect::<Result<_>>()?;
                if labels.len() != schema.len() {
                    return Err(Error::format(Some(line), "context does not match the schema"));
                }
                let mut ctx = schema.anchor();
                for (d, label) in labels.iter().enumerate() {
                    ctx.0[d] = lookup_condition(&schema, schema.dimension(d).name(), label, line)?.1;
                }
                local.insert(ctx, read_mf(&mut c, "prefilter.local", &users, &items)?);
            }
            TrainedModel::Prefilter(PrefilterModel::from_parts(floor, global, local))
        }
    };
    if let Some(extra) = c.sections.get(c.pos) {
        return Err(Error::format(Some(extra.line), format!("unexpected section [{}]", extra.name)));
    }
    Ok(SavedModel {
        schema,
        users,
        items,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_dataset, ParseOptions};
    use crate::models::ModelSpec;

    fn data() -> crate::Dataset {
        let text = "user,item,rating,Time,Place\n\
                    ann,\"film, the\",4,weekend,home\n\
                    ann,b%x,2,weekday,na\n\
                    bob,\"film, the\",5,na,cinema\n\
                    bob,b%x,3,weekend,cinema\n\
                    bob,c,1,weekend,home\n";
        parse_dataset(text.as_bytes(), &ParseOptions::default()).unwrap()
    }

    #[test]
    fn escaping_round_trips() {
        for s in ["plain", "a b", "x:y=z", "%", "", "naïve", "[sec]"] {
            let e = escape(s);
            assert!(!e.contains([' ', ':', '=', '[']), "{e}");
            assert_eq!(unescape(&e, 1).unwrap(), s);
        }
    }

    #[test]
    fn every_kind_round_trips_exactly() {
        let d = data();
        for kind in ModelKind::ALL {
            let mut spec = ModelSpec::new(kind);
            spec.train.epochs = 3;
            spec.train.rank = 2;
            spec.prefilter_floor = 2;
            spec.train.init_spread = 0.3;
            let saved = SavedModel {
                schema: d.schema.clone(),
                users: d.users.clone(),
                items: d.items.clone(),
                model: spec.train(&d).unwrap(),
            };
            let mut buf = Vec::new();
            write_model(&saved, &mut buf).unwrap();
            let back = read_model(buf.as_slice()).unwrap_or_else(|e| panic!("{kind}: {e}"));
            assert_eq!(back, saved, "{kind}");
            if kind == ModelKind::Prefilter {
                assert!(String::from_utf8(buf).unwrap().contains("[prefilter.local]"));
            }
        }
    }

    #[test]
    fn rejects_bad_files() {
        assert!(read_model("".as_bytes()).is_err());
        assert!(read_model("ctxrec-model 9\n".as_bytes()).is_err());
        let err = read_model("ctxrec-model 1\nmodel = mf\n[schema]\nnonsense\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        let err = read_model("ctxrec-model 1\nmodel = nope\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
