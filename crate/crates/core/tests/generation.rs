use std::collections::BTreeMap;

use proptest::prelude::*;

use refrepair::diffing::{apply_unified_diff, render_unified_diff};
use refrepair::generation::{
    build_repair_prompt, fill_template, parse_solution, render_solution, PromptInputs, PromptTemplates,
    SolutionContext,
};

fn code_line() -> impl Strategy<Value = String> {
    "[a-z =+()0-9]{0,20}".prop_filter("no fences", |l| !l.trim_start().starts_with("```"))
}

fn description() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z ,.]{0,40}".prop_map(|s| s.trim().to_string()).prop_filter("non-empty", |s| !s.is_empty())
}

proptest! {
    #[test]
    fn rendered_solutions_parse_back(
        lines in proptest::collection::vec(code_line(), 1..12),
        descriptions in proptest::collection::vec(description(), 1..5),
    ) {
        let code: String = lines.iter().map(|l| format!("{l}\n")).collect();
        prop_assume!(!code.trim().is_empty());
        let parsed = parse_solution(&render_solution(&code, &descriptions, "python")).unwrap();
        prop_assert_eq!(parsed.fixed_code, code);
        prop_assert_eq!(parsed.descriptions, descriptions);
        prop_assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn brace_free_templates_are_unchanged(text in "[^{}]{0,80}") {
        prop_assert_eq!(fill_template(&text, &BTreeMap::new()).unwrap(), text);
    }
}

#[test]
fn prompt_carries_annotated_reference_diffs() {
    let before = "a = int(input())\nprint(a - 1)\n";
    let after = "a = int(input())\nprint(a + 1)\n";
    let diff = render_unified_diff(before, after, 3);
    let contexts = vec![SolutionContext {
        pair_id: "p1".into(),
        diff_text: diff.clone(),
        description: "1. Subtracts instead of adding.".into(),
        description_key: "k".into(),
    }];
    let templates = PromptTemplates::default();
    let prompt = build_repair_prompt(
        &PromptInputs {
            problem_statement: "Print a + 1.",
            buggy_code: "a = int(input())\nprint(a)",
            language: "python",
            k: 1,
            token_budget: 16_000,
            templates: &templates,
        },
        &contexts,
    )
    .unwrap();
    assert!(prompt.text.contains("Print a + 1."));
    assert!(prompt.text.contains("# bug: 1. Subtracts instead of adding.\n@@"));
    assert!(prompt.text.contains("```python\na = int(input())\nprint(a)\n```"));
    // The reference diff survives annotation and still applies.
    let start = prompt.text.find("```diff\n").unwrap() + 8;
    let end = start + prompt.text[start..].find("```").unwrap();
    let annotated = &prompt.text[start..end];
    assert_eq!(apply_unified_diff(before, annotated).unwrap(), after);
}
