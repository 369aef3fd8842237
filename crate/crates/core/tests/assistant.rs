use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use mkg_core::kg::{import_jsonl, run_completion, EntityKind, KnowledgeGraph, Provenance, RelationKind, Triple};
use mkg_core::qa::{
    classify_intent, faq_fallback, item_card, kbqa, AnswerSource, AnswerTemplates, FaqEntry, FaqStore, Intent,
    IntentRules, Payload, QaConfig, QaEngine, Route, Session, Stage,
};
use mkg_core::retrieval::{ner_tag, score, search, Catalog, ItemDoc, Lexicon, RetrievalError, ScoreWeights};
use mkg_core::storyboard::{generate_storyboard, PathSelector, StoryTemplates, StoryboardError};
use serde::Deserialize;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn catalog_kg() -> KnowledgeGraph {
    let mut kg = import_jsonl(fixture("catalog.jsonl")).unwrap();
    run_completion(&mut kg);
    kg
}

fn engine() -> QaEngine {
    engine_with(QaConfig::default())
}

fn engine_with(config: QaConfig) -> QaEngine {
    let faq = FaqStore::new(FaqStore::load_entries(fixture("faq.jsonl")).unwrap()).unwrap();
    QaEngine::new(
        Arc::new(catalog_kg()),
        Lexicon::load(fixture("semantic.tsv")).unwrap(),
        Lexicon::load(fixture("properties.tsv")).unwrap(),
        faq,
        AnswerTemplates::load(fixture("answer_templates.json")).unwrap(),
        config,
    )
    .unwrap()
}

#[test]
fn skincare_fixture_derives_poi_and_path() {
    let mut kg = import_jsonl(fixture("skincare.jsonl")).unwrap();
    assert_eq!((kg.entity_count(), kg.triple_count()), (5, 4));
    assert_eq!(run_completion(&mut kg), 1);
    let derived: Vec<&Triple> = kg.triples().iter().filter(|t| t.provenance == Provenance::Derived).collect();
    assert_eq!(derived.len(), 1);
    assert_eq!(
        (derived[0].source.as_str(), derived[0].relation, derived[0].target.as_str()),
        ("it_mask", RelationKind::HasPoi, "poi_fair")
    );
    let paths = mkg_core::kg::cognitive_paths(&kg, "it_mask").unwrap();
    assert_eq!(paths.len(), 1);
    let labels: Vec<&str> = paths[0].nodes().iter().map(|id| kg.entity(id).unwrap().label.as_str()).collect();
    assert_eq!(labels, ["熬夜", "皮肤暗沉", "皮肤白皙", "甘草酸二钾", "面膜"]);
}

#[test]
fn skincare_storyboard_has_five_frames_in_path_order() {
    let mut kg = import_jsonl(fixture("skincare.jsonl")).unwrap();
    run_completion(&mut kg);
    let sb = generate_storyboard(&kg, "it_mask", &PathSelector::First, &StoryTemplates::default()).unwrap();
    let nodes: Vec<&str> = sb.frames.iter().map(|f| f.node.as_str()).collect();
    assert_eq!(nodes, ["sc_stay_up", "pb_dull", "poi_fair", "pv_dkg", "it_mask"]);
    let kinds: Vec<EntityKind> = sb.frames.iter().map(|f| f.kind).collect();
    assert_eq!(kinds, mkg_core::storyboard::FRAME_KINDS);
    assert_eq!(sb.frames[0].utterance, "熬夜容易导致皮肤暗沉。");
    assert!(sb.frames.iter().all(|f| !f.utterance.is_empty() && f.images.is_empty()));
    let json = serde_json::to_value(&sb).unwrap();
    assert_eq!(json["item"], "it_mask");
    assert_eq!(json["frames"][2]["kind"], "POI");
    assert_eq!(
        json["frames"][0].as_object().unwrap().keys().collect::<Vec<_>>(),
        ["images", "kind", "node", "utterance"]
    );
}

#[test]
fn storyboard_selector_and_errors() {
    let kg = catalog_kg();
    let paths = mkg_core::kg::cognitive_paths(&kg, "it_mask").unwrap();
    assert_eq!(paths.len(), 2);
    let t = StoryTemplates::default();
    let first = generate_storyboard(&kg, "it_mask", &PathSelector::First, &t).unwrap();
    assert_eq!(first.frames[0].node, paths[0].scenario);
    let other = generate_storyboard(&kg, "it_mask", &PathSelector::Nth(1), &t).unwrap();
    assert_eq!(other.frames[0].node, paths[1].scenario);
    let via = generate_storyboard(&kg, "it_mask", &PathSelector::Through("pv_ha".into()), &t).unwrap();
    assert_eq!(via, other);
    for sb in [&first, &other] {
        for f in &sb.frames {
            let linked: BTreeSet<String> = kg.images_of(&f.node).iter().map(|e| e.id.clone()).collect();
            assert!(f.images.iter().all(|i| linked.contains(i)));
        }
    }
    assert_eq!(first.frames[2].images, ["img_fair"]);
    assert_eq!(
        generate_storyboard(&kg, "it_cup", &PathSelector::First, &t),
        Err(StoryboardError::NoPath("it_cup".into()))
    );
    assert_eq!(
        generate_storyboard(&kg, "nope", &PathSelector::First, &t),
        Err(StoryboardError::UnknownItem("nope".into()))
    );
    assert_eq!(
        generate_storyboard(&kg, "it_mask", &PathSelector::Nth(2), &t),
        Err(StoryboardError::NoSelection(2))
    );
}

#[test]
fn lipstick_query_ranks_both_lipsticks_first() {
    let kg = catalog_kg();
    let lex = Lexicon::load(fixture("semantic.tsv")).unwrap();
    let catalog = Catalog::from_kg(&kg, &lex);
    assert_eq!(catalog.len(), 5);
    let w = ScoreWeights::default();
    let hits = search("看看口红", &catalog, &lex, &w, 10).unwrap();
    let q = ner_tag("看看口红", &lex);
    // brute-force score table over the whole catalog
    let mut table: Vec<(String, f64)> = catalog.docs.iter().map(|d| (d.item.clone(), score(&q, d, &w))).collect();
    table.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let lipsticks = ["it_lip_dior", "it_lip_pd"];
    assert!(lipsticks.contains(&table[0].0.as_str()) && lipsticks.contains(&table[1].0.as_str()));
    assert!(table[2..].iter().all(|(_, s)| *s < table[1].1));
    let ranked: Vec<&str> = hits.iter().map(|h| h.item.as_str()).collect();
    assert_eq!(&ranked[..2], &[table[0].0.as_str(), table[1].0.as_str()]);
}

#[test]
fn span_match_outranks_larger_token_overlap() {
    let mut lex = Lexicon::new();
    lex.insert("口红", "category").unwrap();
    // query tokens {看, 下, 口, 红, 新, 款}
    let q = ner_tag("看下口红新款", &lex);
    // A: {口, 红, a, b, c, d} shares the span and 2 tokens; union 10
    let a = ItemDoc::from_texts("a", ["口红 a b c d"], &lex);
    // B: {看, 下, 新, x, y, z} shares 3 tokens, no span; union 9
    let b = ItemDoc::from_texts("b", ["看下新 x y z"], &lex);
    let w = ScoreWeights::default();
    assert_eq!(score(&q, &a, &w), 2.0 + 2.0 / 10.0);
    assert_eq!(score(&q, &b, &w), 3.0 / 9.0);
    let disjoint = ItemDoc::from_texts("c", ["p q r"], &lex);
    assert_eq!(score(&q, &disjoint, &w), 0.0);
    let self_doc = ItemDoc::from_texts("q", ["看下口红新款"], &lex);
    assert_eq!(score(&q, &self_doc, &w), 1.0 + 2.0);
}

#[test]
fn search_errors_and_single_item() {
    let lex = Lexicon::new();
    let w = ScoreWeights::default();
    let empty = Catalog::default();
    assert_eq!(search("x", &empty, &lex, &w, 3), Err(RetrievalError::EmptyCatalog));
    let one = Catalog {
        docs: vec![ItemDoc::from_texts("only", ["red cup"], &lex)],
    };
    assert!(matches!(search("cup", &one, &lex, &w, 0), Err(RetrievalError::InvalidParams(_))));
    let hits = search("red cup", &one, &lex, &w, 5).unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].item, "only");
    assert!(search("blue", &one, &lex, &w, 5).unwrap().is_empty());
}

#[test]
fn intent_examples() {
    let kg = catalog_kg();
    let sem = Lexicon::load(fixture("semantic.tsv")).unwrap();
    let props = Lexicon::load(fixture("properties.tsv")).unwrap();
    let rules = IntentRules::default();
    let mut s = Session::new("s");
    let intent = |q: &str, s: &Session| classify_intent(q, s, &kg, &sem, &props, &rules);
    assert_eq!(intent("Can I see the lipstick? 看看口红", &s), Intent::ViewItem);
    assert_eq!(intent("今天天气不错", &s), Intent::OutOfScope);
    assert_eq!(intent("T恤什么尺码", &s), Intent::OutOfScope);
    s.select(&kg, "it_tshirt").unwrap();
    assert_eq!(intent("What is the size of the T-shirt? T恤什么尺码", &s), Intent::ItemQuestion);
    assert_eq!(intent("今天天气不错", &s), Intent::OutOfScope);
    assert!(s.select(&kg, "pv_size").is_err());
}

#[test]
fn kbqa_answers_size_with_chart() {
    let kg = catalog_kg();
    let props = Lexicon::load(fixture("properties.tsv")).unwrap();
    let t = AnswerTemplates::default();
    let a = kbqa("什么尺码", "it_tshirt", &kg, &props, &t).unwrap().unwrap();
    assert_eq!(a.text, "纯棉圆领T恤的尺码是S/M/L/XL。");
    assert_eq!(a.images, ["img_size_chart"]);
    assert_eq!(a.source, AnswerSource::Kbqa);
    assert_eq!(kbqa("好看吗", "it_tshirt", &kg, &props, &t).unwrap(), None);
    assert_eq!(kbqa("什么尺码", "it_cup", &kg, &props, &t).unwrap(), None);
    assert!(kbqa("什么尺码", "nope", &kg, &props, &t).is_err());
    let both = kbqa("颜色和尺码", "it_tshirt", &kg, &props, &t).unwrap().unwrap();
    assert_eq!(both.text, "纯棉圆领T恤的颜色是白色。");
    let multi = kbqa("成分", "it_mask", &kg, &props, &t).unwrap().unwrap();
    assert_eq!(multi.text, "面膜的成分是甘草酸二钾、玻尿酸。");
    assert_eq!(multi.images, ["img_dkg"]);
}

#[test]
fn kbqa_values_are_stored_triples() {
    let kg = catalog_kg();
    let props = Lexicon::load(fixture("properties.tsv")).unwrap();
    let t = AnswerTemplates::from(std::collections::BTreeMap::from([("*".to_string(), "{value}".to_string())]));
    for item in kg.entities_of(EntityKind::Item) {
        for (surface, entry) in props.entries() {
            let q = surface.concat();
            if let Some(a) = kbqa(&q, &item.id, &kg, &props, &t).unwrap() {
                let stored: Vec<&Triple> = kg
                    .outgoing(&item.id, RelationKind::HasProperty)
                    .filter(|tr| tr.qualifier.as_deref() == Some(entry.semantic_type.as_str()))
                    .collect();
                for v in a.text.split('、') {
                    assert!(stored.iter().any(|tr| kg.entity(&tr.target).unwrap().label == v));
                }
                for img in &a.images {
                    assert!(stored
                        .iter()
                        .any(|tr| kg.images_of(&tr.target).iter().any(|e| &e.id == img)));
                }
            }
        }
    }
}

#[test]
fn faq_fixture_matches_brute_force_argmax() {
    let entries = FaqStore::load_entries(fixture("faq.jsonl")).unwrap();
    assert_eq!(entries.len(), 20);
    let store = FaqStore::new(entries.clone()).unwrap();
    for q in ["多久能发货呢", "能不能退货", "发票可以开吗", "有没有优惠", "保质期是多久"] {
        let sims = store.similarities(q);
        let mut best = 0;
        for i in 1..sims.len() {
            if sims[i] > sims[best] {
                best = i;
            }
        }
        let a = faq_fallback(q, &store, 0.3, "默认");
        if sims[best] >= 0.3 {
            assert_eq!(a.text, entries[best].a, "{q}");
            assert_eq!(a.source, AnswerSource::Faq);
        } else {
            assert_eq!(a.source, AnswerSource::Fallback);
        }
    }
    let empty = FaqStore::new(Vec::<FaqEntry>::new()).unwrap();
    assert_eq!(faq_fallback("多久发货", &empty, 0.3, "默认").source, AnswerSource::Fallback);
}

#[derive(Deserialize)]
struct Step {
    query: Option<String>,
    select: Option<String>,
    intent: Option<Intent>,
    route: Option<Route>,
    items: Option<Vec<String>>,
    item: Option<String>,
}

fn conversation() -> Vec<Step> {
    std::fs::read_to_string(fixture("conversation.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn conversation_transcript_matches() {
    let engine = engine();
    let mut session = Session::new("c");
    let mut queries = 0;
    for step in conversation() {
        if let Some(item) = step.select {
            session.select(&engine.kg, &item).unwrap();
            continue;
        }
        let q = step.query.unwrap();
        queries += 1;
        let r = engine.handle(&q, &mut session).unwrap();
        assert_eq!(Some(r.intent), step.intent, "{q}");
        assert_eq!(Some(r.route), step.route, "{q}");
        assert_eq!(session.current_item, step.item, "{q}");
        if let Some(items) = step.items {
            let Payload::Items { items: hits } = &r.payload else {
                panic!("{q}: expected items");
            };
            assert_eq!(hits.iter().map(|h| h.item.clone()).collect::<Vec<_>>(), items);
        }
        // kbqa always runs before faq, and faq only after kbqa found nothing
        match r.route {
            Route::Kbqa => assert_eq!(r.trace, [Stage::Classify, Stage::Kbqa]),
            Route::Faq | Route::Fallback if r.intent == Intent::ItemQuestion => {
                assert_eq!(r.trace, [Stage::Classify, Stage::Kbqa, Stage::Faq])
            }
            Route::Search => assert_eq!(r.trace, [Stage::Classify, Stage::Search]),
            _ => assert_eq!(r.trace, [Stage::Classify]),
        }
    }
    assert_eq!(queries, 30);
}

#[test]
fn raising_theta_never_turns_fallback_into_faq() {
    let engine = engine();
    let thetas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let mut session = Session::new("t");
    for step in conversation() {
        if let Some(item) = step.select {
            session.select(&engine.kg, &item).unwrap();
            continue;
        }
        let q = step.query.unwrap();
        let routes: Vec<Route> = thetas
            .iter()
            .map(|&t| engine.handle_with_theta(&q, &mut session.clone(), t).unwrap().route)
            .collect();
        for w in routes.windows(2) {
            assert!(!(w[0] == Route::Fallback && w[1] == Route::Faq), "{q}: {routes:?}");
        }
        engine.handle(&q, &mut session).unwrap();
    }
}

#[test]
fn handle_is_deterministic() {
    let engine = engine();
    let run = || {
        let mut s = Session::new("d");
        conversation()
            .into_iter()
            .filter_map(|st| {
                if let Some(i) = st.select {
                    s.select(&engine.kg, &i).unwrap();
                    return None;
                }
                Some(serde_json::to_string(&engine.handle(&st.query.unwrap(), &mut s).unwrap()).unwrap())
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn item_card_sections() {
    let kg = catalog_kg();
    let card = item_card(&kg, "it_mask").unwrap();
    assert_eq!(card.title, "面膜");
    assert_eq!(card.appearance, ["img_mask"]);
    let pois: Vec<&str> = card.poi.iter().map(|p| p.label.as_str()).collect();
    assert_eq!(pois, ["皮肤白皙", "水润保湿"]);
    assert_eq!(card.poi[0].images, ["img_fair"]);
    assert_eq!(card.comment, ["敷完皮肤亮了很多", "精华很多"]);
    assert_eq!(card.properties.len(), 2);
    assert!(item_card(&kg, "pv_size").is_err());
    let engine = engine_with(QaConfig {
        theta: 0.9,
        ..QaConfig::default()
    });
    assert_eq!(engine.config.theta, 0.9);
    assert!(QaEngine::new(
        engine.kg.clone(),
        Lexicon::new(),
        Lexicon::new(),
        FaqStore::new(vec![]).unwrap(),
        AnswerTemplates::default(),
        QaConfig {
            theta: 1.5,
            ..QaConfig::default()
        }
    )
    .is_err());
}
