#[path = "support/extraction_suite.rs"]
mod suite;

use spoilershed::extraction::strip_markup_extract_spans;
use spoilershed::Error;

#[test]
fn strip_golden_cases() {
    assert!(suite::strip_case_count() >= 30);
    let failures = suite::strip_golden_failures();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn unbalanced_spoilers_are_errors() {
    for markup in [
        "a <span class=\"spoiler\">never closed",
        "<b><span class=\"spoiler\">x</b></span>",
    ] {
        assert!(
            matches!(strip_markup_extract_spans(markup, "spoiler"), Err(Error::UnbalancedMarkup { .. })),
            "{markup:?}"
        );
    }
}

#[test]
fn sentence_golden_cases() {
    assert!(suite::sentence_case_count() >= 6);
    let failures = suite::sentence_golden_failures();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn fuzzed_markup_round_trips_spans() {
    let cases = 10_000;
    let violations = suite::fuzz_violations(cases, 2024);
    println!("span round-trip: {cases} fuzzed inputs, {} violations", violations.len());
    assert!(violations.is_empty(), "{}", violations[..violations.len().min(5)].join("\n"));
}
