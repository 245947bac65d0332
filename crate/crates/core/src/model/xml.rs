//! Canonical XML encoding of every entity.
//!
//! Output is UTF-8 with LF line endings, no BOM, two-space indentation,
//! child elements in field declaration order and collections sorted by id.
//! Every document ends with a single LF; the parser requires it, so any
//! truncation of a canonical document is rejected. The element layout is
//! documented in `docs/xml-schema.md`.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use chrono::NaiveDate;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

use super::*;

const DECL: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";

/// Serializes an entity after checking its invariants.
pub fn serialize_entity(entity: &Entity) -> Result<Vec<u8>, ModelError> {
    entity.check()?;
    let mut w = Writer::default();
    w.out.push_str(DECL);
    match entity {
        Entity::Article(a) => write_article(&mut w, a),
        Entity::Author(a) => write_author(&mut w, a),
        Entity::Topic(t) => {
            w.open("topic", &[("id", t.id.0.to_string())]);
            w.text("label", &t.label);
            w.close("topic");
        }
        Entity::Keyword(k) => {
            w.open("keyword", &[("id", k.id.0.to_string())]);
            w.text("word", &k.word);
            w.close("keyword");
        }
        Entity::Language(l) => {
            w.open("language", &[("id", l.id.0.to_string())]);
            w.text("code", &l.code);
            w.text("dialect", &l.dialect);
            w.close("language");
        }
        Entity::Country(c) => {
            w.open("country", &[("id", c.id.0.to_string())]);
            w.text("name", &c.name);
            w.text("iso-code", &c.iso_code);
            w.close("country");
        }
        Entity::Date(d) => w.empty(
            "date",
            &[
                ("value", d.date.to_string()),
                ("day-of-year", d.day_of_year().to_string()),
                ("weekday", d.weekday().to_string()),
            ],
        ),
        Entity::Media(m) => {
            w.open("media", &[("id", m.id.0.to_string()), ("kind", m.kind.as_str().to_string())]);
            w.text("byte-size", &m.byte_size.to_string());
            w.text("internal-comment", &m.internal_comment);
            w.text("payload-digest", &m.payload_digest);
            w.text("transcript", &m.transcript);
            w.close("media");
        }
        Entity::Metadata(r) => write_metadata(&mut w, r),
    }
    Ok(w.out.into_bytes())
}

fn write_article(w: &mut Writer, a: &Article) {
    w.open("article", &[("id", a.id.0.to_string())]);
    w.text("title", &a.title);
    w.text("body", &a.body);
    w.text("version", &a.version.to_string());
    w.empty("author", &[("ref", a.author_id.0.to_string())]);
    w.refs("topics", "topic", a.topic_ids.iter().map(|t| t.0 as u64));
    w.refs("keywords", "keyword", a.keyword_ids.iter().map(|k| k.0 as u64));
    w.empty("language", &[("ref", a.language_id.0.to_string())]);
    w.empty("country", &[("ref", a.country_id.0.to_string())]);
    w.text("publish-date", &a.publish_date.to_string());
    w.refs("media-refs", "media", a.media_refs.iter().map(|m| m.0));
    w.refs("citations", "cite", a.citations.iter().map(|c| c.0));
    w.text("page-count", &a.page_count.to_string());
    if a.monthly_views.is_empty() {
        w.empty("monthly-views", &[]);
    } else {
        w.open("monthly-views", &[]);
        for (month, views) in &a.monthly_views {
            w.text_attrs("views", &[("month", month.to_string())], &views.to_string());
        }
        w.close("monthly-views");
    }
    w.close("article");
}

fn write_author(w: &mut Writer, a: &Author) {
    w.open(
        "author",
        &[("id", a.id.0.to_string()), ("subtype", a.kind.discriminator().to_string())],
    );
    w.text("name", &a.name);
    w.text("birth-date", &a.birth_date.to_string());
    w.empty("citizenship", &[("ref", a.citizenship_country_id.0.to_string())]);
    w.empty("work-country", &[("ref", a.work_country_id.0.to_string())]);
    match &a.kind {
        AuthorKind::Journalist { employer_journal, interview_count } => {
            w.text("employer-journal", employer_journal);
            w.text("interview-count", &interview_count.to_string());
        }
        AuthorKind::Professional { specialty_topic_id } => {
            w.empty("specialty-topic", &[("ref", specialty_topic_id.0.to_string())]);
        }
    }
    w.close("author");
}

fn write_metadata(w: &mut Writer, r: &MetadataRecord) {
    w.open("metadata", &[("document", r.document.to_string())]);
    if r.tfidf.is_empty() {
        w.empty("tfidf", &[]);
    } else {
        w.open("tfidf", &[]);
        for (term, weight) in &r.tfidf {
            w.text_attrs("term", &[("weight", weight.to_string())], term);
        }
        w.close("tfidf");
    }
    if let Some(p) = r.pagerank {
        w.text("pagerank", &p.to_string());
    }
    if r.topic_distribution.is_empty() {
        w.empty("topic-distribution", &[]);
    } else {
        w.open("topic-distribution", &[]);
        for (i, p) in r.topic_distribution.iter().enumerate() {
            w.empty("topic", &[("index", i.to_string()), ("p", p.to_string())]);
        }
        w.close("topic-distribution");
    }
    w.close("metadata");
}

#[derive(Default)]
struct Writer {
    out: String,
    depth: usize,
}

impl Writer {
    fn indent(&mut self) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
    }

    fn start_tag(&mut self, name: &str, attrs: &[(&str, String)]) {
        self.indent();
        self.out.push('<');
        self.out.push_str(name);
        for (k, v) in attrs {
            let _ = write!(self.out, " {}=\"{}\"", k, escape(v, true));
        }
    }

    fn open(&mut self, name: &str, attrs: &[(&str, String)]) {
        self.start_tag(name, attrs);
        self.out.push_str(">\n");
        self.depth += 1;
    }

    fn close(&mut self, name: &str) {
        self.depth -= 1;
        self.indent();
        let _ = writeln!(self.out, "</{name}>");
    }

    fn empty(&mut self, name: &str, attrs: &[(&str, String)]) {
        self.start_tag(name, attrs);
        self.out.push_str("/>\n");
    }

    fn text(&mut self, name: &str, text: &str) {
        self.text_attrs(name, &[], text);
    }

    fn text_attrs(&mut self, name: &str, attrs: &[(&str, String)], text: &str) {
        self.start_tag(name, attrs);
        let _ = writeln!(self.out, ">{}</{}>", escape(text, false), name);
    }

    fn refs(&mut self, name: &str, child: &str, ids: impl Iterator<Item = u64>) {
        let mut ids = ids.peekable();
        if ids.peek().is_none() {
            self.empty(name, &[]);
            return;
        }
        self.open(name, &[]);
        for id in ids {
            self.empty(child, &[("ref", id.to_string())]);
        }
        self.close(name);
    }
}

fn escape(s: &str, attr: bool) -> Cow<'_, str> {
    let needs = s.chars().any(|c| matches!(c, '&' | '<' | '>' | '\r') || (attr && matches!(c, '"' | '\n' | '\t')));
    if !needs {
        return Cow::Borrowed(s);
    }
    let mut out = String::with_capacity(s.len() + 8);
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            '"' if attr => out.push_str("&quot;"),
            '\n' if attr => out.push_str("&#10;"),
            '\t' if attr => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    Cow::Owned(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: u64,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("malformed XML: {0}")]
    Malformed(String),
    #[error("schema error: {0}")]
    Schema(String),
}

/// Parses one entity document. Nothing is returned unless the whole document
/// is well formed and matches the schema.
pub fn parse_entity(bytes: &[u8]) -> Result<Entity, ParseError> {
    if !bytes.ends_with(b"\n") {
        return Err(ParseError {
            offset: bytes.len() as u64,
            kind: ParseErrorKind::Malformed("document must end with a line feed".into()),
        });
    }
    if !bytes.starts_with(b"<?xml") {
        return Err(ParseError { offset: 0, kind: ParseErrorKind::Malformed("missing XML declaration".into()) });
    }
    let mut p = Parser::new(bytes);
    match p.raw()? {
        Event::Decl(_) => {}
        _ => return Err(p.malformed("missing XML declaration")),
    }
    let (root, empty) = p.element()?;
    let name = p.name_of(&root)?;
    let entity = match (name.as_str(), empty) {
        ("article", false) => Entity::Article(parse_article(&mut p, &root)?),
        ("author", false) => Entity::Author(parse_author(&mut p, &root)?),
        ("topic", false) => {
            let id = TopicId(p.attr_parse(&root, "id")?);
            let label = p.text_element("label")?;
            p.end("topic")?;
            Entity::Topic(Topic { id, label })
        }
        ("keyword", false) => {
            let id = KeywordId(p.attr_parse(&root, "id")?);
            let word = p.text_element("word")?;
            p.end("keyword")?;
            Entity::Keyword(Keyword { id, word })
        }
        ("language", false) => {
            let id = LanguageId(p.attr_parse(&root, "id")?);
            let code = p.text_element("code")?;
            let dialect = p.text_element("dialect")?;
            p.end("language")?;
            Entity::Language(Language { id, code, dialect })
        }
        ("country", false) => {
            let id = CountryId(p.attr_parse(&root, "id")?);
            let name = p.text_element("name")?;
            let iso_code = p.text_element("iso-code")?;
            p.end("country")?;
            Entity::Country(Country { id, name, iso_code })
        }
        ("date", true) => {
            let date: NaiveDate = p.attr_parse(&root, "value")?;
            let info = DateInfo::new(date);
            let doy: u32 = p.attr_parse(&root, "day-of-year")?;
            let weekday = p.attr(&root, "weekday")?;
            if doy != info.day_of_year() || weekday != info.weekday().to_string() {
                return Err(p.schema("date attributes inconsistent with the date value"));
            }
            Entity::Date(info)
        }
        ("media", false) => {
            let id = MediaId(p.attr_parse(&root, "id")?);
            let kind = match p.attr(&root, "kind")?.as_str() {
                "audio" => MediaKind::Audio,
                "video" => MediaKind::Video,
                other => return Err(p.schema(&format!("unknown media kind `{other}`"))),
            };
            let byte_size = p.text_parse("byte-size")?;
            let internal_comment = p.text_element("internal-comment")?;
            let payload_digest = p.text_element("payload-digest")?;
            let transcript = p.text_element("transcript")?;
            p.end("media")?;
            Entity::Media(MediaRef { id, kind, byte_size, internal_comment, payload_digest, transcript })
        }
        ("metadata", false) => Entity::Metadata(parse_metadata(&mut p, &root)?),
        (other, _) => return Err(p.schema(&format!("unexpected root element `{other}`"))),
    };
    p.finish()?;
    Ok(entity)
}

fn parse_article(p: &mut Parser<'_>, root: &BytesStart<'_>) -> Result<Article, ParseError> {
    let id = ArticleId(p.attr_parse(root, "id")?);
    let title = p.text_element("title")?;
    let body = p.text_element("body")?;
    let version = p.text_parse("version")?;
    let author_id = AuthorId(p.ref_element("author")?);
    let topic_ids: BTreeSet<TopicId> = p.ref_list("topics", "topic")?.into_iter().map(TopicId).collect();
    let keyword_ids: BTreeSet<KeywordId> =
        p.ref_list("keywords", "keyword")?.into_iter().map(KeywordId).collect();
    let language_id = LanguageId(p.ref_element("language")?);
    let country_id = CountryId(p.ref_element("country")?);
    let publish_date = p.text_parse("publish-date")?;
    let media_refs = p.ref_list("media-refs", "media")?.into_iter().map(MediaId).collect();
    let citations = p.ref_list("citations", "cite")?.into_iter().map(ArticleId).collect();
    let page_count = p.text_parse("page-count")?;
    let mut monthly_views = BTreeMap::new();
    let (e, empty) = p.expect_element("monthly-views")?;
    drop(e);
    if !empty {
        while let Some((e, child_empty)) = p.child_or_end("monthly-views")? {
            if p.name_of(&e)? != "views" || child_empty {
                return Err(p.schema("expected <views> element"));
            }
            let month: YearMonth = p.attr_parse(&e, "month")?;
            let views = p.text_content_parse("views")?;
            if monthly_views.insert(month, views).is_some() {
                return Err(p.schema("duplicate month in monthly-views"));
            }
        }
    }
    p.end("article")?;
    Ok(Article {
        id,
        title,
        body,
        version,
        author_id,
        topic_ids,
        keyword_ids,
        language_id,
        country_id,
        publish_date,
        media_refs,
        citations,
        page_count,
        monthly_views,
    })
}

fn parse_author(p: &mut Parser<'_>, root: &BytesStart<'_>) -> Result<Author, ParseError> {
    let id = AuthorId(p.attr_parse(root, "id")?);
    let subtype = p.attr(root, "subtype")?;
    let name = p.text_element("name")?;
    let birth_date = p.text_parse("birth-date")?;
    let citizenship_country_id = CountryId(p.ref_element("citizenship")?);
    let work_country_id = CountryId(p.ref_element("work-country")?);
    let kind = match subtype.as_str() {
        "journalist" => {
            let employer_journal = p.text_element("employer-journal")?;
            let interview_count = p.text_parse("interview-count")?;
            AuthorKind::Journalist { employer_journal, interview_count }
        }
        "professional" => AuthorKind::Professional { specialty_topic_id: TopicId(p.ref_element("specialty-topic")?) },
        other => return Err(p.schema(&format!("unknown author subtype `{other}`"))),
    };
    p.end("author")?;
    Ok(Author { id, name, birth_date, citizenship_country_id, work_country_id, kind })
}

fn parse_metadata(p: &mut Parser<'_>, root: &BytesStart<'_>) -> Result<MetadataRecord, ParseError> {
    let document: DocumentId = p.attr_parse(root, "document")?;
    let mut tfidf = BTreeMap::new();
    let (_, empty) = p.expect_element("tfidf")?;
    if !empty {
        while let Some((e, child_empty)) = p.child_or_end("tfidf")? {
            if p.name_of(&e)? != "term" || child_empty {
                return Err(p.schema("expected <term> element"));
            }
            let weight: f64 = p.attr_parse(&e, "weight")?;
            let term = p.text_content("term")?;
            if tfidf.insert(term, weight).is_some() {
                return Err(p.schema("duplicate term in tfidf"));
            }
        }
    }
    let (e, empty) = p.element()?;
    let mut pagerank = None;
    let (e, empty) = if p.name_of(&e)? == "pagerank" && !empty {
        pagerank = Some(p.text_content_parse("pagerank")?);
        p.element()?
    } else {
        (e, empty)
    };
    if p.name_of(&e)? != "topic-distribution" {
        return Err(p.schema("expected <topic-distribution>"));
    }
    let mut topic_distribution = Vec::new();
    if !empty {
        while let Some((e, child_empty)) = p.child_or_end("topic-distribution")? {
            if p.name_of(&e)? != "topic" || !child_empty {
                return Err(p.schema("expected empty <topic> element"));
            }
            let index: usize = p.attr_parse(&e, "index")?;
            if index != topic_distribution.len() {
                return Err(p.schema("topic indices must be dense and ascending"));
            }
            topic_distribution.push(p.attr_parse(&e, "p")?);
        }
    }
    p.end("metadata")?;
    Ok(MetadataRecord { document, tfidf, pagerank, topic_distribution })
}

struct Parser<'a> {
    reader: Reader<&'a [u8]>,
}

impl<'a> Parser<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        let mut reader = Reader::from_reader(bytes);
        let cfg = reader.config_mut();
        cfg.trim_text(false);
        cfg.check_end_names = true;
        cfg.expand_empty_elements = false;
        Parser { reader }
    }

    fn pos(&self) -> u64 {
        self.reader.buffer_position()
    }

    fn malformed(&self, msg: &str) -> ParseError {
        ParseError { offset: self.pos(), kind: ParseErrorKind::Malformed(msg.to_string()) }
    }

    fn schema(&self, msg: &str) -> ParseError {
        ParseError { offset: self.pos(), kind: ParseErrorKind::Schema(msg.to_string()) }
    }

    fn raw(&mut self) -> Result<Event<'a>, ParseError> {
        self.reader.read_event().map_err(|e| ParseError {
            offset: self.reader.error_position(),
            kind: ParseErrorKind::Malformed(e.to_string()),
        })
    }

    /// Next event that is not inter-element whitespace.
    fn structural(&mut self) -> Result<Event<'a>, ParseError> {
        loop {
            let ev = self.raw()?;
            match &ev {
                Event::Text(t) if t.iter().all(|b| b.is_ascii_whitespace()) => continue,
                Event::Text(_) => return Err(self.schema("unexpected text content")),
                Event::Comment(_) => continue,
                Event::Eof => return Err(self.malformed("unexpected end of document")),
                _ => return Ok(ev),
            }
        }
    }

    fn name_of(&self, e: &BytesStart<'_>) -> Result<String, ParseError> {
        std::str::from_utf8(e.name().as_ref())
            .map(str::to_string)
            .map_err(|_| self.malformed("element name is not UTF-8"))
    }

    /// Next start or empty element.
    fn element(&mut self) -> Result<(BytesStart<'a>, bool), ParseError> {
        match self.structural()? {
            Event::Start(e) => Ok((e, false)),
            Event::Empty(e) => Ok((e, true)),
            _ => Err(self.schema("expected an element")),
        }
    }

    fn expect_element(&mut self, name: &str) -> Result<(BytesStart<'a>, bool), ParseError> {
        let (e, empty) = self.element()?;
        if self.name_of(&e)? != name {
            return Err(self.schema(&format!("expected <{name}>")));
        }
        Ok((e, empty))
    }

    /// Next child element of `parent`, or `None` once `</parent>` is consumed.
    fn child_or_end(&mut self, parent: &str) -> Result<Option<(BytesStart<'a>, bool)>, ParseError> {
        match self.structural()? {
            Event::Start(e) => Ok(Some((e, false))),
            Event::Empty(e) => Ok(Some((e, true))),
            Event::End(e) if e.name().as_ref() == parent.as_bytes() => Ok(None),
            _ => Err(self.schema(&format!("unexpected content in <{parent}>"))),
        }
    }

    fn end(&mut self, name: &str) -> Result<(), ParseError> {
        match self.structural()? {
            Event::End(e) if e.name().as_ref() == name.as_bytes() => Ok(()),
            _ => Err(self.schema(&format!("expected </{name}>"))),
        }
    }

    fn attr(&self, e: &BytesStart<'_>, key: &str) -> Result<String, ParseError> {
        for a in e.attributes() {
            let a = a.map_err(|err| self.malformed(&err.to_string()))?;
            if a.key.as_ref() == key.as_bytes() {
                return a
                    .unescape_value()
                    .map(|v| v.into_owned())
                    .map_err(|err| self.malformed(&err.to_string()));
            }
        }
        Err(self.schema(&format!("missing attribute `{key}`")))
    }

    fn attr_parse<T: FromStr>(&self, e: &BytesStart<'_>, key: &str) -> Result<T, ParseError> {
        let v = self.attr(e, key)?;
        v.parse().map_err(|_| self.schema(&format!("invalid value `{v}` for attribute `{key}`")))
    }

    /// Text content after a start tag already consumed, through the end tag.
    fn text_content(&mut self, name: &str) -> Result<String, ParseError> {
        let mut text = String::new();
        loop {
            match self.raw()? {
                Event::Text(t) => {
                    let s = t.unescape().map_err(|err| self.malformed(&err.to_string()))?;
                    text.push_str(&s);
                }
                Event::End(e) if e.name().as_ref() == name.as_bytes() => return Ok(text),
                Event::Eof => return Err(self.malformed("unexpected end of document")),
                _ => return Err(self.schema(&format!("unexpected content in <{name}>"))),
            }
        }
    }

    fn text_content_parse<T: FromStr>(&mut self, name: &str) -> Result<T, ParseError> {
        let v = self.text_content(name)?;
        v.parse().map_err(|_| self.schema(&format!("invalid value `{v}` in <{name}>")))
    }

    fn text_element(&mut self, name: &str) -> Result<String, ParseError> {
        let (_, empty) = self.expect_element(name)?;
        if empty {
            return Ok(String::new());
        }
        self.text_content(name)
    }

    fn text_parse<T: FromStr>(&mut self, name: &str) -> Result<T, ParseError> {
        let (_, empty) = self.expect_element(name)?;
        if empty {
            return Err(self.schema(&format!("<{name}> must not be empty")));
        }
        self.text_content_parse(name)
    }

    fn ref_element<T: FromStr>(&mut self, name: &str) -> Result<T, ParseError> {
        let (e, empty) = self.expect_element(name)?;
        if !empty {
            return Err(self.schema(&format!("<{name}> must be an empty reference element")));
        }
        self.attr_parse(&e, "ref")
    }

    fn ref_list<T: FromStr>(&mut self, name: &str, child: &str) -> Result<Vec<T>, ParseError> {
        let (_, empty) = self.expect_element(name)?;
        let mut out = Vec::new();
        if empty {
            return Ok(out);
        }
        while let Some((e, child_empty)) = self.child_or_end(name)? {
            if self.name_of(&e)? != child || !child_empty {
                return Err(self.schema(&format!("expected <{child} ref=\"..\"/>")));
            }
            out.push(self.attr_parse(&e, "ref")?);
        }
        Ok(out)
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        loop {
            match self.raw()? {
                Event::Eof => return Ok(()),
                Event::Text(t) if t.iter().all(|b| b.is_ascii_whitespace()) => {}
                Event::Comment(_) => {}
                _ => return Err(self.schema("content after the root element")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn article(id: u64) -> Article {
        Article {
            id: ArticleId(id),
            title: "Markets & <rates>".into(),
            body: "first line\nsecond \"quoted\" line\r\n".into(),
            version: 1,
            author_id: AuthorId(3),
            topic_ids: [TopicId(2), TopicId(1)].into_iter().collect(),
            keyword_ids: [KeywordId(7)].into_iter().collect(),
            language_id: LanguageId(0),
            country_id: CountryId(4),
            publish_date: date("2001-09-12"),
            media_refs: vec![MediaId(9)],
            citations: vec![],
            page_count: 3,
            monthly_views: [(YearMonth::new(2001, 9), 120), (YearMonth::new(2001, 10), 40)]
                .into_iter()
                .collect(),
        }
    }

    fn journalist() -> Author {
        Author {
            id: AuthorId(3),
            name: "Ana Lobo".into(),
            birth_date: date("1951-03-02"),
            citizenship_country_id: CountryId(1),
            work_country_id: CountryId(2),
            kind: AuthorKind::Journalist { employer_journal: "Daily Ledger".into(), interview_count: 12 },
        }
    }

    #[test]
    fn empty_citations_use_empty_element() {
        let xml = String::from_utf8(serialize_entity(&Entity::Article(article(5))).unwrap()).unwrap();
        assert!(xml.contains("\n  <citations/>\n"), "{xml}");
        assert!(xml.ends_with("</article>\n"));
    }

    #[test]
    fn author_carries_subtype_discriminator() {
        let xml = String::from_utf8(serialize_entity(&Entity::Author(journalist())).unwrap()).unwrap();
        assert!(xml.contains("<author id=\"3\" subtype=\"journalist\">"), "{xml}");
        match parse_entity(xml.as_bytes()).unwrap() {
            Entity::Author(a) => assert!(a.is_journalist()),
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn unknown_subtype_is_schema_error() {
        let xml = String::from_utf8(serialize_entity(&Entity::Author(journalist())).unwrap())
            .unwrap()
            .replace("subtype=\"journalist\"", "subtype=\"editor\"");
        let err = parse_entity(xml.as_bytes()).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Schema(_)), "{err}");
    }

    #[test]
    fn round_trip_every_kind() {
        let entities = vec![
            Entity::Article(article(5)),
            Entity::Author(journalist()),
            Entity::Author(Author {
                kind: AuthorKind::Professional { specialty_topic_id: TopicId(4) },
                ..journalist()
            }),
            Entity::Topic(Topic { id: TopicId(1), label: "science".into() }),
            Entity::Keyword(Keyword { id: KeywordId(1), word: "orbit".into() }),
            Entity::Language(Language { id: LanguageId(1), code: "en".into(), dialect: "en-GB".into() }),
            Entity::Country(Country { id: CountryId(1), name: "France".into(), iso_code: "FR".into() }),
            Entity::Date(DateInfo::new(date("2008-11-05"))),
            Entity::Media(MediaRef {
                id: MediaId(2),
                kind: MediaKind::Video,
                byte_size: 10,
                internal_comment: String::new(),
                payload_digest: digest_hex(b"0123456789"),
                transcript: "hello there".into(),
            }),
            Entity::Metadata(MetadataRecord {
                document: DocumentId::Article(ArticleId(5)),
                tfidf: [("orbit".to_string(), 0.1 + 0.2), ("zeta".to_string(), 1e-300)].into_iter().collect(),
                pagerank: Some(0.25),
                topic_distribution: vec![0.5, 0.25, 0.25],
            }),
            Entity::Metadata(MetadataRecord {
                document: DocumentId::Transcript(MediaId(2)),
                tfidf: BTreeMap::new(),
                pagerank: None,
                topic_distribution: vec![],
            }),
        ];
        for e in entities {
            let bytes = serialize_entity(&e).unwrap();
            let back = parse_entity(&bytes).unwrap_or_else(|err| panic!("{}: {err}", e.kind()));
            assert_eq!(back, e);
            assert_eq!(serialize_entity(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn truncation_at_every_byte_is_rejected() {
        let bytes = serialize_entity(&Entity::Article(article(5))).unwrap();
        for cut in 0..bytes.len() {
            assert!(parse_entity(&bytes[..cut]).is_err(), "prefix of {cut} bytes parsed");
        }
    }

    #[test]
    fn malformed_reports_offset() {
        let err = parse_entity(b"<?xml version=\"1.0\"?>\n<topic id=\"1\">\n  <label>x</lab>\n</topic>\n").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Malformed(_)), "{err}");
        assert!(err.offset > 20, "{err}");
    }

    #[test]
    fn invariant_violation_refuses_serialization() {
        let mut a = article(5);
        a.citations = vec![ArticleId(5)];
        let err = serialize_entity(&Entity::Article(a)).unwrap_err();
        assert!(err.to_string().contains("own id"), "{err}");
    }

    #[test]
    fn inconsistent_date_info_rejected() {
        let xml = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<date value=\"2001-09-12\" day-of-year=\"1\" weekday=\"Wed\"/>\n";
        assert!(matches!(parse_entity(xml.as_bytes()).unwrap_err().kind, ParseErrorKind::Schema(_)));
    }
}
