use std::collections::HashSet;

use poset_icl::poset::{build_hasse, holds_values, PosetKind};
use poset_icl::prompt::{feasible_pairs, make_prompt, parse_rendered, PromptStyle};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = PosetKind> {
    prop_oneof![Just(PosetKind::Lo), Just(PosetKind::LoBin), Just(PosetKind::Div)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn prompts_satisfy_their_contract(
        kind in kind(), k in 1usize..60, c in 1usize..40, count in 1usize..80, seed in any::<u64>(),
    ) {
        let p = make_prompt(kind, k, c, count, seed, PromptStyle::Standard).unwrap();
        let again = make_prompt(kind, k, c, count, seed, PromptStyle::Standard).unwrap();
        prop_assert_eq!(p.render(), again.render());

        let h = build_hasse(kind, k).unwrap();
        prop_assert_eq!(p.examples.len(), h.all_edges().len());
        let demos: HashSet<(u64, u64)> = p.examples.iter().copied().collect();
        let mut seen = HashSet::new();
        for t in &p.tasks {
            prop_assert!(!demos.contains(&(t.a, t.b)) && !demos.contains(&(t.b, t.a)));
            prop_assert!(t.a as usize > k || t.b as usize > k);
            prop_assert!(t.a as usize <= k + c && t.b as usize <= k + c);
            prop_assert_eq!(t.truth, holds_values(kind, t.a, t.b));
            prop_assert!(seen.insert((t.a, t.b)), "duplicate task");
        }
        let feasible = feasible_pairs(kind, k, c).unwrap().len();
        prop_assert_eq!(p.tasks.len(), count.min(feasible));
        prop_assert_eq!(p.stats.true_count + p.stats.false_count, p.tasks.len());

        if !p.tasks.is_empty() {
            let parsed = parse_rendered(&p.render()).unwrap();
            prop_assert_eq!(parsed.kind, kind);
            prop_assert_eq!(parsed.k, k);
            prop_assert_eq!(&parsed.examples, &p.examples);
            let tasks: Vec<(u64, u64)> = p.tasks.iter().map(|t| (t.a, t.b)).collect();
            prop_assert_eq!(parsed.tasks, tasks);
            prop_assert!(parsed.window.iter().all(|&v| v as usize > k && v as usize <= k + c));
        }
    }

    #[test]
    fn extended_edges_never_sampled(kind in kind(), k in 1usize..40, c in 1usize..20, seed in any::<u64>()) {
        let ext = build_hasse(kind, k + c).unwrap();
        let p = make_prompt(kind, k, c, 50, seed, PromptStyle::Standard).unwrap();
        for t in &p.tasks {
            prop_assert!(!ext.has_edge(t.a as usize, t.b as usize));
        }
    }

    #[test]
    fn labeled_prompts_hold_one_query(kind in kind(), k in 1usize..30, c in 1usize..10, seed in any::<u64>()) {
        for style in [PromptStyle::Labeled, PromptStyle::LabeledInstructed] {
            let p = make_prompt(kind, k, c, 50, seed, style).unwrap();
            prop_assert!(p.tasks.len() <= 1);
            let text = p.render();
            if let Some(t) = p.tasks.first() {
                prop_assert!(text.trim_end().ends_with("->"));
                prop_assert_eq!(text.lines().filter(|l| l.ends_with("->")).count(), 1);
                prop_assert!(t.a as usize > k || t.b as usize > k);
            }
            prop_assert_eq!(style == PromptStyle::LabeledInstructed, !p.instruction.is_empty());
        }
    }
}
