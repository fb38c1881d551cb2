use super::markup::{decode_entities, tokenize, Token};

/// One top-level item of a trope list, with nested sub-items folded in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEntry {
    pub url: String,
    pub trope: String,
    pub markup: String,
}

const MAIN_ARTICLE_ID: &str = "main-article";

fn is_list(name: &str) -> bool {
    name == "ul" || name == "ol"
}

/// Extracts trope-list entries from a stored page.
///
/// The search is restricted to the element with id `main-article` when the
/// page has one. Every `<li>` directly inside a top-level list becomes an
/// entry; its trope name is the text of the first link inside it.
pub fn extract_entries(page_markup: &str, url: &str) -> Vec<RawEntry> {
    let tokens = tokenize(page_markup);
    let has_main = tokens
        .iter()
        .any(|t| t.token.attr("id") == Some(MAIN_ARTICLE_ID));

    let mut entries = Vec::new();
    // open elements while inside scope: (name)
    let mut stack: Vec<String> = Vec::new();
    let mut in_scope = !has_main;
    let mut scope_depth = 0usize;
    let mut list_depth = 0usize;
    // (markup start byte, trope text, link state)
    let mut current: Option<(usize, String, LinkState)> = None;

    let finish = |entries: &mut Vec<RawEntry>, cur: (usize, String, LinkState), end: usize| {
        let (start, trope, _) = cur;
        entries.push(RawEntry {
            url: url.to_string(),
            trope: collapse(&trope),
            markup: page_markup[start..end].to_string(),
        });
    };

    for spanned in &tokens {
        let token = &spanned.token;
        if !in_scope {
            if token.attr("id") == Some(MAIN_ARTICLE_ID) {
                in_scope = true;
                scope_depth = stack.len();
                if let Token::Start { name, .. } = token {
                    stack.push(name.clone());
                }
            } else {
                track(&mut stack, token);
            }
            continue;
        }
        match token {
            Token::Start { name, self_closing, .. } => {
                if name == "li" && list_depth == 1 {
                    if let Some(cur) = current.take() {
                        finish(&mut entries, cur, spanned.bytes.start);
                    }
                    current = Some((spanned.bytes.end, String::new(), LinkState::Before));
                } else if name == "a" {
                    if let Some((_, _, link @ LinkState::Before)) = current.as_mut() {
                        *link = LinkState::Inside;
                    }
                }
                if is_list(name) {
                    list_depth += 1;
                }
                if !super::markup::is_void(name) && !self_closing {
                    stack.push(name.clone());
                }
            }
            Token::End { name } => {
                if name == "a" {
                    if let Some((_, _, link @ LinkState::Inside)) = current.as_mut() {
                        *link = LinkState::Done;
                    }
                }
                let closes_entry = (name == "li" && list_depth == 1)
                    || (is_list(name) && list_depth == 1);
                if closes_entry {
                    if let Some(cur) = current.take() {
                        finish(&mut entries, cur, spanned.bytes.start);
                    }
                }
                if is_list(name) && list_depth > 0 {
                    list_depth -= 1;
                }
                if let Some(idx) = stack.iter().rposition(|n| n == name) {
                    stack.truncate(idx);
                }
                if has_main && stack.len() <= scope_depth {
                    in_scope = false;
                    if let Some(cur) = current.take() {
                        finish(&mut entries, cur, spanned.bytes.start);
                    }
                }
            }
            Token::Text(t) => {
                if let Some((_, trope, LinkState::Inside)) = current.as_mut() {
                    trope.push_str(&decode_entities(t));
                }
            }
        }
    }
    if let Some(cur) = current.take() {
        finish(&mut entries, cur, page_markup.len());
    }
    entries
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LinkState {
    Before,
    Inside,
    Done,
}

fn track(stack: &mut Vec<String>, token: &Token<'_>) {
    match token {
        Token::Start { name, self_closing, .. } => {
            if !super::markup::is_void(name) && !self_closing {
                stack.push(name.clone());
            }
        }
        Token::End { name } => {
            if let Some(idx) = stack.iter().rposition(|n| n == name) {
                stack.truncate(idx);
            }
        }
        Token::Text(_) => {}
    }
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Canonical URL declared by the page, if any.
pub(crate) fn canonical_url(page_markup: &str) -> Option<String> {
    tokenize(page_markup).into_iter().find_map(|t| match &t.token {
        Token::Start { name, .. } if name == "link" && t.token.attr("rel") == Some("canonical") => {
            t.token.attr("href").map(str::to_string)
        }
        Token::Start { name, .. } if name == "meta" && t.token.attr("property") == Some("og:url") => {
            t.token.attr("content").map(str::to_string)
        }
        _ => None,
    })
}
