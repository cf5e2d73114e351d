//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with:
//!   cargo test -p ergochat-eval --test acceptance -- --nocapture

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ergochat_eval::dataset::{
    build_prompt, canonical_json, parse_dataset, split_dataset, write_dataset, AnnotationRecord,
    Dataset, DatasetError, ImageRecord, PartitionTag, RiskLevel, TaskToken,
};
use ergochat_eval::evaluation::{
    compare_runs, load_predictions, perplexity_agreement, render_report, score_captions,
    vqa_accuracy, write_scores, PredictionRecord, ReportFormat, ScoreRecord,
};
use ergochat_eval::metrics::{
    align, bleu, build_info_table, cosine_similarity, euclidean_distance, extract_tuples,
    meteor, modified_precisions, rouge1, spice_lite, MetricId, MetricRegistry,
};
use ergochat_eval::model_client::{run_batch_with_backend, StubBackend};
use ergochat_eval::riskmodel::{
    classify_risk, perplexity, LmConfig, NGramLanguageModel, RiskClassifier,
};
use ergochat_eval::survey::{
    plan_versions, resolve_choices, summarize, OptionChoice, SurveyResponse,
};
use ergochat_eval::textproc::tokenize;

mod common;

fn vqa_pred(image_id: u64, output: &str) -> PredictionRecord {
    PredictionRecord {
        model_id: "fixture".to_string(),
        image_id,
        task: TaskToken::Vqa,
        prompt: build_prompt(TaskToken::Vqa).to_string(),
        output_text: output.to_string(),
    }
}

fn vqa_dataset(n: u64) -> Dataset {
    let images = (1..=n)
        .map(|i| ImageRecord {
            id: i,
            file_name: format!("{i}.png"),
            width: None,
            height: None,
        })
        .collect();
    let annotations = (1..=n)
        .map(|i| AnnotationRecord {
            id: i,
            image_id: i,
            task: TaskToken::Vqa,
            text: if i % 2 == 0 { "yes" } else { "no" }.to_string(),
            risk_exposed: i % 2 == 0,
            reba_level: None,
        })
        .collect();
    Dataset::new(images, annotations, PartitionTag::Test).unwrap()
}

#[test]
fn criterion_01_vqa_accuracy_fixture() {
    let start = Instant::now();
    let d = vqa_dataset(200);

    let preds_for = |correct: usize| -> Vec<PredictionRecord> {
        (1..=200u64)
            .map(|i| {
                let truth = if i % 2 == 0 { "yes" } else { "no" };
                let answer = if (i as usize) <= correct {
                    truth.to_string()
                } else if truth == "yes" {
                    "no".to_string()
                } else {
                    "yes".to_string()
                };
                vqa_pred(i, &answer)
            })
            .collect()
    };

    let report = vqa_accuracy(&preds_for(193), &d).unwrap();
    assert_eq!(report.n, 200);
    assert_eq!(report.correct, 193);
    assert_eq!(report.accuracy_pct, 96.5);

    let report = vqa_accuracy(&preds_for(190), &d).unwrap();
    assert_eq!(report.accuracy_pct, 95.0);

    assert!(start.elapsed().as_secs_f64() < 1.0, "must finish in < 1 s");
    println!("[PASS] criterion 1: 193/200 -> exactly 96.5%, 190/200 -> exactly 95%");
}

fn score_pair(metric: MetricId, image_id: u64, f: f64, u: f64) -> (ScoreRecord, ScoreRecord) {
    (
        ScoreRecord {
            image_id,
            metric,
            value: f,
            degenerate: false,
        },
        ScoreRecord {
            image_id,
            metric,
            value: u,
            degenerate: false,
        },
    )
}

#[test]
fn criterion_02_average_improvement_fixture() {
    // varied per-image differences averaging exactly 0.25531
    let mut ft = Vec::new();
    let mut gen = Vec::new();
    for i in 1..=200u64 {
        let wiggle = if i % 2 == 0 { 0.01 } else { -0.01 };
        let (f, u) = (0.4 + 0.25531 + wiggle, 0.4);
        let (a, b) = score_pair(MetricId::RougeR, i, f, u);
        ft.push(a);
        gen.push(b);
        let (a, b) = score_pair(MetricId::Nist, i, 1.61, 0.17);
        ft.push(a);
        gen.push(b);
        let (a, b) = score_pair(MetricId::EuclideanDistance, i, 8.55, 8.97);
        ft.push(a);
        gen.push(b);
    }
    let report = compare_runs(&ft, &gen).unwrap();
    let rouge = report
        .rows
        .iter()
        .find(|r| r.metric == MetricId::RougeR)
        .unwrap();
    assert!((rouge.avg_difference - 0.25531).abs() < 1e-12);
    assert!((rouge.avg_improvement_pct.unwrap() - 25.531).abs() < 1e-9);

    let text = render_report(&report, ReportFormat::Tsv);
    let row = |label: &str| {
        text.lines()
            .find(|l| l.starts_with(label) && l.split('\t').count() == 5)
            .unwrap()
            .to_string()
    };
    assert!(row("ROUGE_r").ends_with("\t25.53%"), "{}", row("ROUGE_r"));
    assert!(row("NIST").ends_with("\tN/A"));
    assert!(row("Euc_distance").ends_with("\tN/A"));
    println!("[PASS] criterion 2: avg difference 0.25531 renders 25.53%; NIST and Euc_distance render N/A");
}

#[test]
fn criterion_03_improvement_share_fixture() {
    // fine-tuned strictly higher on 194 of 200 images
    let mut ft = Vec::new();
    let mut gen = Vec::new();
    for i in 1..=200u64 {
        let (f, u) = if i <= 194 { (0.8, 0.5) } else { (0.2, 0.5) };
        let (a, b) = score_pair(MetricId::RougeR, i, f, u);
        ft.push(a);
        gen.push(b);
        // Euclidean distance decreases (improves) on 130 of 200
        let (f, u) = if i <= 130 { (2.0, 3.0) } else { (4.0, 3.0) };
        let (a, b) = score_pair(MetricId::EuclideanDistance, i, f, u);
        ft.push(a);
        gen.push(b);
    }
    let report = compare_runs(&ft, &gen).unwrap();
    let pct = |metric: MetricId| {
        report
            .rows
            .iter()
            .find(|r| r.metric == metric)
            .unwrap()
            .pct_improved
    };
    assert!((pct(MetricId::RougeR) - 97.0).abs() < 0.05);
    assert!((pct(MetricId::EuclideanDistance) - 65.0).abs() < 0.05);
    println!("[PASS] criterion 3: 194/200 higher -> 97.0%; Euclidean lower on 130/200 -> 65.0%");
}

#[test]
fn criterion_04_metric_identity_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1D);
    for trial in 0..500 {
        let text = common::random_text(&mut rng, 12);
        let tokens = tokenize(&text);
        let m = tokens.len() as f64;

        let r = rouge1(&text, &text);
        assert_eq!((r.recall, r.precision, r.f1), (1.0, 1.0, 1.0), "trial {trial}");

        let b = bleu(&text, &[text.clone()]).unwrap();
        assert!((b - 1.0).abs() < 1e-12, "trial {trial}: bleu {b}");

        let c = cosine_similarity(&text, &text);
        assert!((c.value - 1.0).abs() < 1e-12, "trial {trial}");

        assert_eq!(euclidean_distance(&text, &text), 0.0, "trial {trial}");

        let s = spice_lite(&text, &text);
        if !extract_tuples(&text).is_empty() {
            assert_eq!(s.value, 1.0, "trial {trial}: {text}");
        }

        let expected_meteor = 1.0 - 0.5 * (1.0 / m).powi(3);
        let got = meteor(&text, &text);
        assert!(
            (got - expected_meteor).abs() < 1e-12,
            "trial {trial}: meteor {got} vs {expected_meteor} ({text})"
        );
    }
    println!("[PASS] criterion 4: identity scores hold on 500 random texts");
}

#[test]
fn criterion_05_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x05);
    for trial in 0..2000 {
        let cand = common::random_symbols(&mut rng, 8);
        let refr = common::random_symbols(&mut rng, 8);
        let refs = vec![refr.clone()];

        for n in 1..=4 {
            let got = ergochat_eval::metrics::clipped_matches(&cand, &refs, n);
            let want = common::oracle_clipped_matches(&cand, &refs, n);
            assert_eq!(got, want, "trial {trial}, n={n}: {cand:?} vs {refr:?}");
        }

        let cand_text = cand.join(" ");
        let ref_text = refr.join(" ");
        let got = rouge1(&cand_text, &ref_text);
        let want = common::oracle_rouge1(&cand, &refr);
        assert_eq!((got.recall, got.precision, got.f1), want, "trial {trial}");

        let got_precisions = modified_precisions(&cand, &refs);
        let want_precisions: Vec<(u64, u64)> = (1..=4)
            .map(|n| common::oracle_clipped_matches(&cand, &refs, n))
            .collect();
        assert_eq!(got_precisions, want_precisions, "trial {trial}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed}s, budget 30s");
    println!("[PASS] criterion 5: 2000 sampled pairs match the enumeration oracle exactly ({elapsed:.2}s)");
}

#[test]
fn criterion_06_meteor_alignment_oracle() {
    let vocab = [
        "worker", "workers", "lift", "lifts", "lifting", "the", "a", "bends", "bend", "panel",
        "panels", "heavy",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x06);
    for trial in 0..200 {
        let gen = |rng: &mut ChaCha8Rng| -> Vec<String> {
            let len = rng.gen_range(1..=6);
            (0..len)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
                .collect()
        };
        let cand = gen(&mut rng);
        let refr = gen(&mut rng);
        let got = align(&cand, &refr);
        let (want_matches, want_chunks) = common::oracle_alignment(&cand, &refr);
        assert_eq!(
            (got.matches, got.chunks),
            (want_matches, want_chunks),
            "trial {trial}: {cand:?} vs {refr:?}"
        );
    }
    println!("[PASS] criterion 6: alignment matches the exhaustive oracle on 200 random pairs");
}

#[test]
fn criterion_07_perplexity_properties() {
    // uniform model: perplexity equals the category count for any text
    let mut rng = ChaCha8Rng::seed_from_u64(0x07);
    for v in [2usize, 5, 17] {
        let symbols: Vec<String> = (0..v - 1).map(|i| format!("s{i}")).collect();
        let lm = NGramLanguageModel::uniform(&symbols);
        assert_eq!(lm.category_count(), v);
        for _ in 0..20 {
            let text = common::random_text(&mut rng, 10);
            let pp = perplexity(&text, &lm).unwrap();
            assert!((pp - v as f64).abs() < 1e-9, "V={v}: {pp}");
        }
    }

    // smoothed contexts normalize to 1
    let corpus: Vec<String> = [
        "the worker bends low over the panel",
        "a worker carries a heavy beam",
        "the worker stands upright",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let lm = ergochat_eval::riskmodel::train_lm(&corpus, &LmConfig::default()).unwrap();
    let mut vocab: Vec<String> = corpus
        .iter()
        .flat_map(|t| tokenize(t))
        .collect::<std::collections::BTreeSet<String>>()
        .into_iter()
        .collect();
    vocab.push("unseen-token".to_string());
    for history in [vec![], tokenize("the"), tokenize("panel unseen")] {
        let sum: f64 = vocab
            .iter()
            .map(|t| lm.conditional_probability(&history, t))
            .sum();
        assert!((sum - 1.0).abs() < 1e-9, "history {history:?}: {sum}");
    }

    // two-class decision against a brute-force computation
    let risk_texts = [
        "worker bends low under the beam",
        "worker twists while lifting the panel",
        "kneeling worker strains overhead",
        "the worker stoops to grab tools",
        "worker carries a heavy load bending",
    ];
    let norisk_texts = [
        "worker stands upright at the bench",
        "the posture is neutral and relaxed",
        "worker sits with support",
        "arms rest at the sides",
        "the worker walks normally",
    ];
    let config = LmConfig::default();
    let risk_corpus: Vec<String> = risk_texts.iter().map(|s| s.to_string()).collect();
    let norisk_corpus: Vec<String> = norisk_texts.iter().map(|s| s.to_string()).collect();
    let classifier = RiskClassifier::train(&risk_corpus, &norisk_corpus, &config).unwrap();

    let brute_force_pp = |corpus: &[&str], text: &str| -> f64 {
        let mut unigrams: HashMap<String, u64> = HashMap::new();
        let mut bigrams: HashMap<(String, String), u64> = HashMap::new();
        let mut context_totals: HashMap<String, u64> = HashMap::new();
        let mut total = 0u64;
        for sentence in corpus {
            let tokens = tokenize(sentence);
            total += tokens.len() as u64;
            for t in &tokens {
                *unigrams.entry(t.clone()).or_insert(0) += 1;
            }
            let mut padded = vec!["<s>".to_string()];
            padded.extend(tokens.iter().cloned());
            for w in padded.windows(2) {
                *bigrams.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
                *context_totals.entry(w[0].clone()).or_insert(0) += 1;
            }
        }
        let categories = unigrams.len() as f64 + 1.0;
        let map = |t: &str| -> String {
            if unigrams.contains_key(t) {
                t.to_string()
            } else {
                "<unk>".to_string()
            }
        };
        let tokens = tokenize(text);
        let mut log_sum = 0.0;
        for i in 0..tokens.len() {
            let t = map(&tokens[i]);
            let ctx = if i == 0 {
                "<s>".to_string()
            } else {
                map(&tokens[i - 1])
            };
            let p1 = (unigrams.get(&t).copied().unwrap_or(0) as f64 + 1.0)
                / (total as f64 + categories);
            let p2 = (bigrams.get(&(ctx.clone(), t.clone())).copied().unwrap_or(0) as f64 + 1.0)
                / (context_totals.get(&ctx).copied().unwrap_or(0) as f64 + categories);
            log_sum += (0.25 * p1 + 0.75 * p2).ln();
        }
        (-log_sum / tokens.len() as f64).exp()
    };

    let probes = [
        "worker bends low",
        "the posture is neutral",
        "worker carries tools upright",
        "kneeling under a beam while lifting",
        "arms rest while the worker stands",
        "completely unseen words here",
    ];
    for text in probes {
        let decision = classify_risk(text, &classifier).unwrap();
        let pp_risk = brute_force_pp(&risk_texts, text);
        let pp_norisk = brute_force_pp(&norisk_texts, text);
        assert_eq!(
            decision.risk_exposed,
            pp_risk <= pp_norisk,
            "{text}: {} vs {} / {} vs {}",
            decision.pp_risk,
            pp_risk,
            decision.pp_norisk,
            pp_norisk
        );
        assert!((decision.pp_risk - pp_risk).abs() < 1e-12, "{text}");
        assert!((decision.pp_norisk - pp_norisk).abs() < 1e-12, "{text}");
    }
    println!("[PASS] criterion 7: uniform perplexity, normalization, and brute-force classifier agreement");
}

#[test]
fn criterion_08_survey_fixtures() {
    let ids: Vec<u64> = (1..=200).collect();

    // partition shape holds for every seed
    for seed in 0..25 {
        let plan = plan_versions(&ids, seed).unwrap();
        let sizes: Vec<usize> = plan.versions.iter().map(|v| v.questions.len()).collect();
        assert_eq!(&sizes[..8], &[15; 8]);
        assert_eq!(&sizes[8..], &[16; 5]);
        let mut covered: Vec<u64> = plan
            .versions
            .iter()
            .flat_map(|v| v.questions.iter().map(|q| q.image_id))
            .collect();
        covered.sort_unstable();
        assert_eq!(covered, ids);
    }

    let plan = plan_versions(&ids, 9).unwrap();
    let questions: Vec<(u32, u64, bool)> = plan
        .versions
        .iter()
        .flat_map(|v| {
            v.questions
                .iter()
                .map(|q| (v.version_id, q.image_id, q.finetuned_is_a))
        })
        .collect();

    let response_for =
        |participant: &str, q: &(u32, u64, bool), choose_finetuned: bool, improvement: u8| {
            let (version_id, image_id, finetuned_is_a) = *q;
            let selected_option = if choose_finetuned == finetuned_is_a {
                OptionChoice::A
            } else {
                OptionChoice::B
            };
            SurveyResponse {
                participant_id: participant.to_string(),
                version_id,
                image_id,
                selected_option,
                improvement_pct: improvement,
                demographics: ergochat_eval::survey::Demographics {
                    education: "phd".to_string(),
                    sector: "construction".to_string(),
                    expertise: "expert".to_string(),
                    age: "30".to_string(),
                },
            }
        };

    // 1000 responses (5 participants x 200 questions), 844 choosing the
    // fine-tuned text
    let mut responses = Vec::new();
    let mut count = 0;
    for p in 0..5 {
        for q in &questions {
            let choose_finetuned = count < 844;
            responses.push(response_for(&format!("p{p}"), q, choose_finetuned, 20));
            count += 1;
        }
    }
    let resolved = resolve_choices(&responses, &plan).unwrap();
    let summary = summarize(&resolved).unwrap();
    assert_eq!(summary.n_responses, 1000);
    assert!((summary.fine_tuned_choice_rate - 84.4).abs() < 1e-9);

    // 200 fine-tuned choices: 103 rate 60% and 97 rate 80% average 69.7%
    let mut responses = Vec::new();
    for (i, q) in questions.iter().enumerate() {
        let improvement = if i < 103 { 60 } else { 80 };
        responses.push(response_for("solo", q, true, improvement));
    }
    let resolved = resolve_choices(&responses, &plan).unwrap();
    let summary = summarize(&resolved).unwrap();
    assert_eq!(summary.fine_tuned_choice_rate, 100.0);
    let avg = summary.avg_accuracy_improvement.unwrap();
    assert!((avg - 69.7).abs() < 1e-9, "{avg}");
    println!("[PASS] criterion 8: choice rate 84.4%, improvement 69.7%, 8x15 + 5x16 partition");
}

fn pipeline_dataset(image_count: u64, dir: &std::path::Path) -> Dataset {
    let images_dir = dir.join("images");
    std::fs::create_dir_all(&images_dir).unwrap();
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut next_ann = 1u64;
    for i in 1..=image_count {
        let file_name = format!("img{i}.png");
        std::fs::write(images_dir.join(&file_name), format!("pixels-{i}")).unwrap();
        images.push(ImageRecord {
            id: i,
            file_name,
            width: Some(448),
            height: Some(448),
        });
        let risk = i % 2 == 0;
        annotations.push(AnnotationRecord {
            id: next_ann,
            image_id: i,
            task: TaskToken::Caption,
            text: if risk {
                format!("worker {i} bends and twists under a heavy beam")
            } else {
                format!("worker {i} stands upright with a neutral relaxed posture")
            },
            risk_exposed: risk,
            reba_level: Some(if risk { RiskLevel::High } else { RiskLevel::Low }),
        });
        next_ann += 1;
        annotations.push(AnnotationRecord {
            id: next_ann,
            image_id: i,
            task: TaskToken::Vqa,
            text: if risk { "yes" } else { "no" }.to_string(),
            risk_exposed: risk,
            reba_level: None,
        });
        next_ann += 1;
    }
    Dataset::new(images, annotations, PartitionTag::Unsplit).unwrap()
}

struct PipelineArtifacts {
    finetune_json: String,
    test_json: String,
    caption_preds: Vec<u8>,
    vqa_preds: Vec<u8>,
    ft_scores: Vec<u8>,
    gen_scores: Vec<u8>,
    report_text: String,
    evaluation_seconds: f64,
}

fn run_pipeline(root: &std::path::Path) -> PipelineArtifacts {
    let d = pipeline_dataset(250, root);
    let dataset_path = root.join("data.json");
    write_dataset(&d, &dataset_path).unwrap();

    // validate: reload and recheck invariants
    let d = ergochat_eval::dataset::load_dataset(&dataset_path).unwrap();
    let (finetune, test) = split_dataset(&d, 200, 7).unwrap();
    write_dataset(&finetune, &root.join("ft.json")).unwrap();
    write_dataset(&test, &root.join("test.json")).unwrap();

    let images_dir = root.join("images");
    let cache = root.join("cache");
    let ft_stub = StubBackend::new("stub-finetuned");
    let gen_stub = StubBackend::new("stub-general");

    let caption_out = root.join("caption.jsonl");
    run_batch_with_backend(
        &test,
        &images_dir,
        TaskToken::Caption,
        &ft_stub,
        4,
        &cache,
        &caption_out,
    )
    .unwrap();
    let vqa_out = root.join("vqa.jsonl");
    run_batch_with_backend(&test, &images_dir, TaskToken::Vqa, &ft_stub, 4, &cache, &vqa_out)
        .unwrap();
    let gen_out = root.join("caption-general.jsonl");
    run_batch_with_backend(
        &test,
        &images_dir,
        TaskToken::Caption,
        &gen_stub,
        4,
        &cache,
        &gen_out,
    )
    .unwrap();

    let caption_preds = load_predictions(&caption_out).unwrap();
    let vqa_preds = load_predictions(&vqa_out).unwrap();
    let gen_preds = load_predictions(&gen_out).unwrap();

    let eval_start = Instant::now();
    let info = build_info_table(&test.caption_corpus()).unwrap();
    let registry = MetricRegistry::with_default_metrics();
    let ft_records = score_captions(&caption_preds, &test, &info, &registry).unwrap();
    let evaluation_seconds = eval_start.elapsed().as_secs_f64();
    let gen_records = score_captions(&gen_preds, &test, &info, &registry).unwrap();
    assert_eq!(ft_records.len(), 1800, "9 metrics x 200 images");

    let _ = vqa_accuracy(&vqa_preds, &test).unwrap();
    let risk: Vec<String> = finetune
        .annotations
        .iter()
        .filter(|a| a.task == TaskToken::Caption && a.risk_exposed)
        .map(|a| a.text.clone())
        .collect();
    let norisk: Vec<String> = finetune
        .annotations
        .iter()
        .filter(|a| a.task == TaskToken::Caption && !a.risk_exposed)
        .map(|a| a.text.clone())
        .collect();
    let classifier = RiskClassifier::train(&risk, &norisk, &LmConfig::default()).unwrap();
    let _ = perplexity_agreement(&caption_preds, &test, &classifier).unwrap();

    let ft_scores_path = root.join("ft.scores");
    write_scores(&ft_records, &ft_scores_path).unwrap();
    let gen_scores_path = root.join("gen.scores");
    write_scores(&gen_records, &gen_scores_path).unwrap();

    let report = compare_runs(&ft_records, &gen_records).unwrap();
    let report_text = render_report(&report, ReportFormat::Text);
    std::fs::write(root.join("report.txt"), &report_text).unwrap();

    PipelineArtifacts {
        finetune_json: std::fs::read_to_string(root.join("ft.json")).unwrap(),
        test_json: std::fs::read_to_string(root.join("test.json")).unwrap(),
        caption_preds: std::fs::read(&caption_out).unwrap(),
        vqa_preds: std::fs::read(&vqa_out).unwrap(),
        ft_scores: std::fs::read(&ft_scores_path).unwrap(),
        gen_scores: std::fs::read(&gen_scores_path).unwrap(),
        report_text,
        evaluation_seconds,
    }
}

#[test]
fn criterion_09_pipeline_determinism() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = run_pipeline(dir_a.path());
    let b = run_pipeline(dir_b.path());

    assert_eq!(a.finetune_json, b.finetune_json);
    assert_eq!(a.test_json, b.test_json);
    assert_eq!(a.caption_preds, b.caption_preds);
    assert_eq!(a.vqa_preds, b.vqa_preds);
    assert_eq!(a.ft_scores, b.ft_scores);
    assert_eq!(a.gen_scores, b.gen_scores);
    assert_eq!(a.report_text, b.report_text);
    assert!(
        a.evaluation_seconds < 10.0,
        "200-pair evaluation took {}s, budget 10s",
        a.evaluation_seconds
    );
    println!(
        "[PASS] criterion 9: two pipeline runs byte-identical; 200-pair evaluation in {:.2}s",
        a.evaluation_seconds
    );
}

fn random_dataset(rng: &mut ChaCha8Rng) -> Dataset {
    let image_count = rng.gen_range(1..=12u64);
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut next_ann = 1u64;
    for i in 1..=image_count {
        images.push(ImageRecord {
            id: i * 3,
            file_name: format!("f{i}.jpg"),
            width: if rng.gen_bool(0.5) {
                Some(rng.gen_range(1..=2000))
            } else {
                None
            },
            height: if rng.gen_bool(0.5) {
                Some(rng.gen_range(1..=2000))
            } else {
                None
            },
        });
        for _ in 0..rng.gen_range(1..=3) {
            let level = match rng.gen_range(0..6) {
                0 => Some(RiskLevel::Negligible),
                1 => Some(RiskLevel::Low),
                2 => Some(RiskLevel::Medium),
                3 => Some(RiskLevel::High),
                4 => Some(RiskLevel::VeryHigh),
                _ => None,
            };
            let risk_exposed = match level {
                Some(l) => l.is_exposed(),
                None => rng.gen_bool(0.5),
            };
            annotations.push(AnnotationRecord {
                id: next_ann,
                image_id: i * 3,
                task: TaskToken::Caption,
                text: common::random_text(rng, 10),
                risk_exposed,
                reba_level: level,
            });
            next_ann += 1;
        }
        if rng.gen_bool(0.7) {
            let yes = rng.gen_bool(0.5);
            annotations.push(AnnotationRecord {
                id: next_ann,
                image_id: i * 3,
                task: TaskToken::Vqa,
                text: if yes { "yes" } else { "no" }.to_string(),
                risk_exposed: yes,
                reba_level: None,
            });
            next_ann += 1;
        }
    }
    Dataset::new(images, annotations, PartitionTag::Unsplit).unwrap()
}

#[test]
fn criterion_10_round_trip_and_threshold_enforcement() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A);
    let files_dir = tempfile::tempdir().unwrap();
    for trial in 0..100 {
        let d = random_dataset(&mut rng);
        let text = canonical_json(&d);
        let back = parse_dataset(&text).unwrap();
        assert_eq!(d, back, "trial {trial}");
        // a few trips through the filesystem as well
        if trial % 10 == 0 {
            let path = files_dir.path().join(format!("d{trial}.json"));
            write_dataset(&d, &path).unwrap();
            let loaded = ergochat_eval::dataset::load_dataset(&path).unwrap();
            assert_eq!(d, loaded, "trial {trial} via file");
        }
    }

    // every inconsistent (risk_exposed, reba_level) pair is rejected with
    // the offending annotation id
    let levels = [
        RiskLevel::Negligible,
        RiskLevel::Low,
        RiskLevel::Medium,
        RiskLevel::High,
        RiskLevel::VeryHigh,
    ];
    let mut violations = 0;
    for level in levels {
        for risk_exposed in [true, false] {
            if risk_exposed == level.is_exposed() {
                continue;
            }
            violations += 1;
            let result = Dataset::new(
                vec![ImageRecord {
                    id: 1,
                    file_name: "x.jpg".to_string(),
                    width: None,
                    height: None,
                }],
                vec![AnnotationRecord {
                    id: 77,
                    image_id: 1,
                    task: TaskToken::Caption,
                    text: "a worker".to_string(),
                    risk_exposed,
                    reba_level: Some(level),
                }],
                PartitionTag::Unsplit,
            );
            match result.unwrap_err() {
                DatasetError::InvariantViolation {
                    record, record_id, ..
                } => {
                    assert_eq!(record, "annotation");
                    assert_eq!(record_id, 77, "{level:?}/{risk_exposed}");
                }
                other => panic!("unexpected error {other:?}"),
            }
        }
    }
    assert_eq!(violations, 5);
    println!("[PASS] criterion 10: 100 round trips are identities; all 5 threshold violations rejected by id");
}
