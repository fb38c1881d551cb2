//! A small lenient HTML tokenizer and the markup-to-annotated-text pass.

use std::ops::Range;

use crate::corpus::SpoilerSpan;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Token<'a> {
    Text(&'a str),
    Start {
        name: String,
        attrs: Vec<(String, String)>,
        self_closing: bool,
    },
    End {
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Spanned<'a> {
    pub token: Token<'a>,
    pub bytes: Range<usize>,
}

impl Token<'_> {
    pub fn attr(&self, key: &str) -> Option<&str> {
        match self {
            Token::Start { attrs, .. } => attrs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str()),
            _ => None,
        }
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.attr("class")
            .is_some_and(|v| v.split_ascii_whitespace().any(|c| c.eq_ignore_ascii_case(class)))
    }
}

const VOID: [&str; 14] = [
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

const BLOCK: [&str; 26] = [
    "address", "article", "aside", "blockquote", "br", "dd", "div", "dl", "dt", "footer", "h1",
    "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "ol", "p", "section", "table", "td", "tr",
    "ul",
];

pub(crate) fn is_void(name: &str) -> bool {
    VOID.contains(&name)
}

fn is_block(name: &str) -> bool {
    BLOCK.contains(&name)
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == ':'
}

/// Splits markup into text runs and tags. Comments, doctypes and the bodies
/// of `script`/`style` are skipped. A `<` that does not open a tag is text.
pub(crate) fn tokenize(src: &str) -> Vec<Spanned<'_>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    let mut text_start = 0;
    fn flush<'a>(src: &'a str, out: &mut Vec<Spanned<'a>>, from: usize, to: usize) {
        if to > from {
            out.push(Spanned {
                token: Token::Text(&src[from..to]),
                bytes: from..to,
            });
        }
    }
    while pos < bytes.len() {
        if bytes[pos] != b'<' {
            pos += 1;
            continue;
        }
        let rest = &src[pos..];
        if rest.starts_with("<!--") {
            flush(src, &mut out, text_start, pos);
            let end = rest.find("-->").map_or(src.len(), |e| pos + e + 3);
            pos = end;
            text_start = pos;
            continue;
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            flush(src, &mut out, text_start, pos);
            pos = rest.find('>').map_or(src.len(), |e| pos + e + 1);
            text_start = pos;
            continue;
        }
        let closing = rest.starts_with("</");
        let name_from = pos + if closing { 2 } else { 1 };
        let name_len = src[name_from..]
            .chars()
            .take_while(|c| is_name_char(*c))
            .count();
        let starts_alpha = src[name_from..]
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic());
        if name_len == 0 || !starts_alpha {
            pos += 1;
            continue;
        }
        let Some((tag_end, attrs, self_closing)) = scan_tag(src, name_from + name_len) else {
            pos += 1;
            continue;
        };
        flush(src, &mut out, text_start, pos);
        let name = src[name_from..name_from + name_len].to_ascii_lowercase();
        let token = if closing {
            Token::End { name: name.clone() }
        } else {
            Token::Start {
                name: name.clone(),
                attrs,
                self_closing,
            }
        };
        out.push(Spanned {
            token,
            bytes: pos..tag_end,
        });
        pos = tag_end;
        text_start = pos;
        if !closing && (name == "script" || name == "style") {
            let needle = format!("</{name}");
            let lower = src[pos..].to_ascii_lowercase();
            pos = lower.find(&needle).map_or(src.len(), |e| pos + e);
            text_start = pos;
        }
    }
    flush(src, &mut out, text_start, src.len());
    out
}

/// Parses attributes after the tag name; returns the byte just past `>`.
fn scan_tag(src: &str, mut pos: usize) -> Option<(usize, Vec<(String, String)>, bool)> {
    let bytes = src.as_bytes();
    let mut attrs = Vec::new();
    let mut self_closing = false;
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        match bytes.get(pos)? {
            b'>' => return Some((pos + 1, attrs, self_closing)),
            b'/' => {
                self_closing = true;
                pos += 1;
            }
            b'<' => return None,
            _ => {
                let key_start = pos;
                while pos < bytes.len()
                    && !bytes[pos].is_ascii_whitespace()
                    && !matches!(bytes[pos], b'=' | b'>' | b'/' | b'<')
                {
                    pos += 1;
                }
                let key = src[key_start..pos].to_ascii_lowercase();
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                let mut value = String::new();
                if bytes.get(pos) == Some(&b'=') {
                    pos += 1;
                    while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                        pos += 1;
                    }
                    match bytes.get(pos)? {
                        q @ (b'"' | b'\'') => {
                            let close = src[pos + 1..].find(*q as char)? + pos + 1;
                            value = decode_entities(&src[pos + 1..close]);
                            pos = close + 1;
                        }
                        _ => {
                            let v_start = pos;
                            while pos < bytes.len()
                                && !bytes[pos].is_ascii_whitespace()
                                && bytes[pos] != b'>'
                            {
                                pos += 1;
                            }
                            value = decode_entities(&src[v_start..pos]);
                        }
                    }
                }
                self_closing = false;
                attrs.push((key, value));
            }
        }
    }
}

fn named_entity(name: &str) -> Option<char> {
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        "hellip" => '…',
        "mdash" => '—',
        "ndash" => '–',
        "lsquo" => '‘',
        "rsquo" => '’',
        "ldquo" => '“',
        "rdquo" => '”',
        "laquo" => '«',
        "raquo" => '»',
        _ => return None,
    })
}

/// Decodes character references; unknown ones are kept verbatim.
pub(crate) fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp + 1..];
        let decoded = after.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let body = &after[..semi];
            let c = if let Some(num) = body.strip_prefix('#') {
                let code = match num.strip_prefix(['x', 'X']) {
                    Some(hex) => u32::from_str_radix(hex, 16).ok(),
                    None => num.parse::<u32>().ok(),
                };
                code.and_then(char::from_u32)
            } else {
                named_entity(body)
            };
            c.map(|c| (c, semi))
        });
        match decoded {
            Some((c, semi)) => {
                out.push(c);
                rest = &after[semi + 1..];
            }
            None => {
                out.push('&');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Plain text with spoiler spans over its characters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotatedText {
    pub text: String,
    pub spans: Vec<SpoilerSpan>,
}

struct OpenElement {
    name: String,
    spoiler: bool,
    offset: usize,
}

fn is_spoiler_element(token: &Token<'_>, class: &str) -> bool {
    match token {
        Token::Start { name, .. } => name.eq_ignore_ascii_case(class) || token.has_class(class),
        _ => false,
    }
}

/// Pops the stack down to (and including) `index`; fails if a spoiler element
/// above `index` would be closed implicitly.
fn close_to(stack: &mut Vec<OpenElement>, index: usize, offset: usize) -> Result<()> {
    if let Some(open) = stack[index + 1..].iter().find(|e| e.spoiler) {
        return Err(Error::UnbalancedMarkup {
            offset,
            message: format!(
                "spoiler element <{}> opened at byte {} is implicitly closed",
                open.name, open.offset
            ),
        });
    }
    stack.truncate(index);
    Ok(())
}

/// Removes all tags, decodes entities, collapses whitespace runs to one
/// space (trimming both ends) and reports every spoiler element as a span
/// over the resulting text. Nested and touching spoiler elements are
/// unioned; spans never start or end on whitespace.
pub fn strip_markup_extract_spans(markup: &str, spoiler_class: &str) -> Result<AnnotatedText> {
    let mut raw: Vec<(char, bool)> = Vec::with_capacity(markup.len());
    let mut stack: Vec<OpenElement> = Vec::new();
    let mut depth = 0usize;
    for Spanned { token, bytes } in tokenize(markup) {
        match &token {
            Token::Text(t) => {
                let inside = depth > 0;
                raw.extend(decode_entities(t).chars().map(|c| (c, inside)));
            }
            Token::Start {
                name, self_closing, ..
            } => {
                if is_block(name) {
                    raw.push((' ', depth > 0));
                }
                if name == "li" {
                    let list = stack.iter().rposition(|e| e.name == "ul" || e.name == "ol");
                    let open_li = stack.iter().rposition(|e| e.name == "li");
                    if let Some(li) = open_li.filter(|&li| list.is_none_or(|l| li > l)) {
                        close_to(&mut stack, li, bytes.start)?;
                        depth = stack.iter().filter(|e| e.spoiler).count();
                    }
                }
                // self-closing spoiler elements are empty and contribute nothing
                if is_void(name) || *self_closing {
                    continue;
                }
                let spoiler = is_spoiler_element(&token, spoiler_class);
                stack.push(OpenElement {
                    name: name.clone(),
                    spoiler,
                    offset: bytes.start,
                });
                depth += usize::from(spoiler);
            }
            Token::End { name } => {
                if is_block(name) {
                    raw.push((' ', depth > 0));
                }
                match stack.iter().rposition(|e| &e.name == name) {
                    Some(idx) => {
                        close_to(&mut stack, idx, bytes.start)?;
                        depth = stack.iter().filter(|e| e.spoiler).count();
                    }
                    None if name.eq_ignore_ascii_case(spoiler_class) => {
                        return Err(Error::UnbalancedMarkup {
                            offset: bytes.start,
                            message: format!("closing </{name}> without an open spoiler element"),
                        });
                    }
                    None => {}
                }
            }
        }
    }
    if let Some(open) = stack.iter().find(|e| e.spoiler) {
        return Err(Error::UnbalancedMarkup {
            offset: open.offset,
            message: format!("spoiler element <{}> is never closed", open.name),
        });
    }
    Ok(normalize(&raw))
}

/// Collapses whitespace and derives spans from per-character spoiler flags.
/// A collapsed space is a spoiler character only if every whitespace
/// character of its run was.
pub(crate) fn normalize(raw: &[(char, bool)]) -> AnnotatedText {
    let mut chars: Vec<(char, bool)> = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let (c, flag) = raw[i];
        if !c.is_whitespace() {
            chars.push((c, flag));
            i += 1;
            continue;
        }
        let mut all = true;
        while i < raw.len() && raw[i].0.is_whitespace() {
            all &= raw[i].1;
            i += 1;
        }
        if !chars.is_empty() && i < raw.len() {
            chars.push((' ', all));
        }
    }
    let text: String = chars.iter().map(|(c, _)| *c).collect();
    let mut spans = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        if !chars[k].1 {
            k += 1;
            continue;
        }
        let mut start = k;
        while k < chars.len() && chars[k].1 {
            k += 1;
        }
        let mut end = k;
        while start < end && chars[start].0 == ' ' {
            start += 1;
        }
        while end > start && chars[end - 1].0 == ' ' {
            end -= 1;
        }
        if start < end {
            spans.push(SpoilerSpan::new(start, end));
        }
    }
    AnnotatedText { text, spans }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(m: &str) -> AnnotatedText {
        strip_markup_extract_spans(m, "spoiler").unwrap()
    }

    #[test]
    fn simple_span() {
        let a = strip("He <spoiler>dies</spoiler>.");
        assert_eq!(a.text, "He dies.");
        assert_eq!(a.spans, vec![SpoilerSpan::new(3, 7)]);
    }

    #[test]
    fn adjacent_spans_merge() {
        let a = strip("<spoiler>A</spoiler><spoiler>B</spoiler>");
        assert_eq!(a.text, "AB");
        assert_eq!(a.spans, vec![SpoilerSpan::new(0, 2)]);
    }

    #[test]
    fn whitespace_normalization_shifts_spans() {
        let a = strip("x  <spoiler> y </spoiler>");
        assert_eq!(a.text, "x y");
        assert_eq!(a.spans, vec![SpoilerSpan::new(2, 3)]);
    }

    #[test]
    fn class_attribute_marks_spoilers() {
        let a = strip(r#"It <span class="spoiler" title="x">was him</span> all along"#);
        assert_eq!(a.text, "It was him all along");
        assert_eq!(a.spans, vec![SpoilerSpan::new(3, 10)]);
    }

    #[test]
    fn unbalanced_reports_offset() {
        match strip_markup_extract_spans("ab <spoiler>cd", "spoiler") {
            Err(Error::UnbalancedMarkup { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("{other:?}"),
        }
        match strip_markup_extract_spans("ab </spoiler>", "spoiler") {
            Err(Error::UnbalancedMarkup { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn plain_text_is_identity() {
        let a = strip("Nothing to see here.");
        assert_eq!(a.text, "Nothing to see here.");
        assert!(a.spans.is_empty());
    }

    #[test]
    fn entities_decode() {
        assert_eq!(decode_entities("a &amp; b &#233; &#x41; &bogus; &"), "a & b é A &bogus; &");
    }

    #[test]
    fn tokenizer_treats_stray_lt_as_text() {
        let toks = tokenize("a < b <i>c</i>");
        assert_eq!(toks[0].token, Token::Text("a < b "));
        assert!(matches!(&toks[1].token, Token::Start { name, .. } if name == "i"));
    }
}
