//! Extraction golden cases and the fuzzed span round-trip, shared by the
//! extraction tests and the acceptance run. Each check returns its failures.

use rand::Rng;
use spoilershed::corpus::SpoilerSpan;
use spoilershed::extraction::{annotate_entry, split_sentences, strip_markup_extract_spans};
use spoilershed::rng::rng;

fn substrings(text: &str, spans: &[SpoilerSpan]) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    spans.iter().map(|s| chars[s.start..s.end].iter().collect()).collect()
}

/// (markup, stripped text, spoiler substrings)
const STRIP_CASES: &[(&str, &str, &[&str])] = &[
    ("Nothing to see here.", "Nothing to see here.", &[]),
    ("He <span class=\"spoiler\">dies</span>.", "He dies.", &["dies"]),
    ("He <spoiler>dies</spoiler>.", "He dies.", &["dies"]),
    ("<span class=\"note spoiler big\">A</span> b", "A b", &["A"]),
    ("<span class=\"spoilers\">A</span> b", "A b", &[]),
    ("<span class='spoiler'>single</span> quotes", "single quotes", &["single"]),
    ("<span class=spoiler>bare</span> attr", "bare attr", &["bare"]),
    ("<SPAN CLASS=\"spoiler\">Loud</SPAN> tag", "Loud tag", &["Loud"]),
    ("<span class=\"spoiler\">outer <span class=\"spoiler\">inner</span> end</span>", "outer inner end", &["outer inner end"]),
    ("<span class=\"spoiler\">A</span><span class=\"spoiler\">B</span>", "AB", &["AB"]),
    ("<span class=\"spoiler\">A</span> <span class=\"spoiler\">B</span>", "A B", &["A", "B"]),
    ("a<span class=\"spoiler\"> b </span>c", "a b c", &["b"]),
    ("x <span class=\"spoiler\">one</span> and <span class=\"spoiler\">two</span>.", "x one and two.", &["one", "two"]),
    ("<span class=\"spoiler\">Tom &amp; Jerry</span> fight", "Tom & Jerry fight", &["Tom & Jerry"]),
    ("Caf&#233; <span class=\"spoiler\">&#x41;lice</span>", "Café Alice", &["Alice"]),
    ("a &bogus; b", "a &bogus; b", &[]),
    ("a &lt;b&gt; c", "a <b> c", &[]),
    ("a < b and c > d", "a < b and c > d", &[]),
    ("one<br>two", "one two", &[]),
    ("<p>one</p><p>two</p>", "one two", &[]),
    ("in<em>line</em> stays", "inline stays", &[]),
    ("  lots \n\t of   space  ", "lots of space", &[]),
    ("a <span class=\"spoiler\"></span> b", "a b", &[]),
    ("a <span class=\"spoiler\">  </span> b", "a b", &[]),
    ("a <span class=\"spoiler\"/> b", "a b", &[]),
    ("<!-- hidden <span class=\"spoiler\">x</span> -->shown", "shown", &[]),
    ("<script>var s = '<b>';</script>text", "text", &[]),
    ("Émile <span class=\"spoiler\">señor 漢字</span> ok", "Émile señor 漢字 ok", &["señor 漢字"]),
    ("<span class=\"spoiler\">He is <a href=\"/x\">the killer</a></span>.", "He is the killer.", &["He is the killer"]),
    ("<span class=\"spoiler\">a<br>b</span>", "a b", &["a b"]),
    ("<span class=\"hidden\">x</span> y", "x y", &["x"]),
];


pub fn strip_case_count() -> usize {
    STRIP_CASES.len()
}

pub fn strip_golden_failures() -> Vec<String> {
    let mut failures = Vec::new();
    for (i, (markup, text, spoilers)) in STRIP_CASES.iter().enumerate() {
        let class = if markup.contains("hidden\"") { "hidden" } else { "spoiler" };
        match strip_markup_extract_spans(markup, class) {
            Ok(out) if out.text == *text && substrings(&out.text, &out.spans) == *spoilers => {}
            Ok(out) => failures.push(format!("case {i} {markup:?}: got {:?} {:?}", out.text, out.spans)),
            Err(e) => failures.push(format!("case {i} {markup:?}: {e}")),
        }
    }
    failures
}

/// (markup, [(sentence, label, spoiler substrings)])
type SentenceCase = (&'static str, &'static [(&'static str, bool, &'static [&'static str])]);

const SENTENCE_CASES: &[SentenceCase] = &[
    (
        "The film opens. <span class=\"spoiler\">Bob dies.</span>",
        &[("The film opens.", false, &[]), ("Bob dies.", true, &["Bob dies."])],
    ),
    (
        "Dr. Smith arrives. He <span class=\"spoiler\">is the killer</span>!",
        &[("Dr. Smith arrives.", false, &[]), ("He is the killer!", true, &["is the killer"])],
    ),
    (
        "First. <span class=\"spoiler\">Second ends. Third</span> starts.",
        &[
            ("First.", false, &[]),
            ("Second ends.", true, &["Second ends."]),
            ("Third starts.", true, &["Third"]),
        ],
    ),
    (
        "Pi is 3.14 exactly. \"Really?\" she asks.",
        &[
            ("Pi is 3.14 exactly.", false, &[]),
            ("\"Really?\"", false, &[]),
            ("she asks.", false, &[]),
        ],
    ),
    ("Wait... what", &[("Wait...", false, &[]), ("what", false, &[])]),
    ("", &[]),
];


pub fn sentence_case_count() -> usize {
    SENTENCE_CASES.len()
}

pub fn sentence_golden_failures() -> Vec<String> {
    let mut failures = Vec::new();
    for (markup, expected) in SENTENCE_CASES {
        let got: Vec<(String, bool, Vec<String>)> = match annotate_entry(markup, "spoiler") {
            Ok(got) => got.iter().map(|s| (s.text.clone(), s.label, substrings(&s.text, &s.spans))).collect(),
            Err(e) => {
                failures.push(format!("{markup:?}: {e}"));
                continue;
            }
        };
        let want: Vec<(String, bool, Vec<String>)> = expected
            .iter()
            .map(|(t, l, sp)| (t.to_string(), *l, sp.iter().map(|x| x.to_string()).collect()))
            .collect();
        if got != want {
            failures.push(format!("{markup:?}: got {got:?}"));
        }
    }
    failures
}

const WORDS: &[&str] = &[
    "alpha", "Beta", "gamma.", "délta", "ß", "漢字", "x", "end!", "q?", "3.14", "Tom&Jerry", "a<b", "\"quoted\"",
];
const INLINE: &[(&str, &str)] = &[("<em>", "</em>"), ("<b>", "</b>"), ("<a href=\"/t/x\">", "</a>"), ("<i class=\"n\">", "</i>")];
const GAPS: &[&str] = &[" ", "  ", "\n", "\t ", " <br> ", "<br/>", " <!-- c --> "];

fn escape(word: &str, r: &mut impl Rng) -> String {
    let mut out = String::new();
    for c in word.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            'é' if r.random_bool(0.5) => out.push_str("&#233;"),
            c => out.push(c),
        }
    }
    out
}

fn render_word(word: &str, r: &mut impl Rng) -> String {
    let w = escape(word, r);
    if r.random_bool(0.3) {
        let (open, close) = INLINE[r.random_range(0..INLINE.len())];
        format!("{open}{w}{close}")
    } else {
        w
    }
}

fn gap(r: &mut impl Rng) -> &'static str {
    GAPS[r.random_range(0..GAPS.len())]
}

/// Builds `cases` random markups with known text and spans and returns the
/// inputs whose extraction or sentence alignment disagrees.
pub fn fuzz_violations(cases: usize, seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    let mut violations = Vec::new();
    for case in 0..cases {
        // runs of (is_spoiler, words); spoiler runs are never adjacent
        let mut runs: Vec<(bool, Vec<&str>)> = Vec::new();
        let mut spoiler = r.random_bool(0.5);
        for _ in 0..r.random_range(1..6) {
            let n = r.random_range(1..5);
            runs.push((spoiler, (0..n).map(|_| WORDS[r.random_range(0..WORDS.len())]).collect()));
            spoiler = !spoiler;
        }

        let mut markup = String::from(if r.random_bool(0.5) { "  " } else { "" });
        let mut text = String::new();
        let mut expected = Vec::new();
        for (k, (is_spoiler, words)) in runs.iter().enumerate() {
            if k > 0 {
                markup.push_str(gap(&mut r));
                text.push(' ');
            }
            let inner: Vec<String> = words.iter().map(|w| render_word(w, &mut r)).collect();
            let mut body = String::new();
            for (i, w) in inner.iter().enumerate() {
                if i > 0 {
                    body.push_str(gap(&mut r));
                }
                body.push_str(w);
            }
            let start = text.chars().count();
            text.push_str(&words.join(" "));
            if *is_spoiler {
                expected.push(SpoilerSpan::new(start, text.chars().count()));
                let pad = if r.random_bool(0.3) { " " } else { "" };
                if r.random_bool(0.2) {
                    body = format!("<span class=\"spoiler\">{body}</span>");
                }
                let open = ["<span class=\"spoiler\">", "<span class=\"x spoiler\">", "<spoiler>", "<div class='spoiler'>"]
                    [r.random_range(0..4)];
                let close = if open.starts_with("<spoiler") {
                    "</spoiler>"
                } else if open.starts_with("<div") {
                    "</div>"
                } else {
                    "</span>"
                };
                markup.push_str(&format!("{open}{pad}{body}{pad}{close}"));
            } else {
                markup.push_str(&body);
            }
        }
        markup.push_str(gap(&mut r));

        match strip_markup_extract_spans(&markup, "spoiler") {
            Ok(out) if out.text == text && out.spans == expected => {
                // sentence alignment must partition the text and keep every spoiler character
                let sentences = annotate_entry(&markup, "spoiler").unwrap();
                let bounds = split_sentences(&text);
                let chars: Vec<char> = text.chars().collect();
                let mut flagged = 0;
                for (s, (b0, b1)) in sentences.iter().zip(&bounds) {
                    let slice: String = chars[*b0..*b1].iter().collect();
                    let shifted_ok = s.spans.iter().all(|sp| {
                        expected.iter().any(|e| e.start <= b0 + sp.start && b0 + sp.end <= e.end)
                    });
                    if s.text != slice || !shifted_ok || s.label != !s.spans.is_empty() {
                        violations.push(format!("case {case}: sentence misaligned in {markup:?}"));
                    }
                    flagged += s.spans.iter().map(|sp| sp.end - sp.start).sum::<usize>();
                }
                let spoiler_chars = expected
                    .iter()
                    .flat_map(|e| chars[e.start..e.end].iter())
                    .filter(|c| !c.is_whitespace())
                    .count();
                let flagged_non_ws: usize = sentences
                    .iter()
                    .map(|s| {
                        let cs: Vec<char> = s.text.chars().collect();
                        s.spans.iter().flat_map(|sp| cs[sp.start..sp.end].to_vec()).filter(|c| !c.is_whitespace()).count()
                    })
                    .sum();
                if sentences.len() != bounds.len() || flagged_non_ws != spoiler_chars || flagged == 0 && !expected.is_empty() {
                    violations.push(format!("case {case}: spoiler characters lost in {markup:?}"));
                }
            }
            Ok(out) => violations.push(format!(
                "case {case}: {markup:?} gave {:?} {:?}, expected {text:?} {expected:?}",
                out.text, out.spans
            )),
            Err(e) => violations.push(format!("case {case}: {markup:?} failed: {e}")),
        }
    }
    violations
}
