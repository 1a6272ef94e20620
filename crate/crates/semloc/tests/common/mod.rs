//! Strategies and pipeline helpers shared by the integration tests.

#![allow(dead_code)]

use std::path::Path;

use proptest::prelude::*;
use semloc_core::{EmbeddingModel, EvalReport, GeoDatabase, GeoPose, LabelMap, QueryOutcome};
use semloc::formats::store::DescriptorStore;

pub fn label_map() -> impl Strategy<Value = LabelMap> {
    (1u32..24, 1u32..24, 1u16..1000).prop_flat_map(|(w, h, c)| {
        proptest::collection::vec(0..c, (w * h) as usize).prop_map(move |labels| LabelMap::new(w, h, c, labels).unwrap())
    })
}

/// Any finite double, including subnormals and signed zero.
pub fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e3..1e3f64,
        Just(0.0),
        Just(-0.0),
    ]
}

pub fn ident() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_\\-\\.]{1,12}|[\\p{L}]{1,6}"
}

fn unique_ids(n: usize) -> impl Strategy<Value = Vec<String>> {
    proptest::collection::btree_set(ident(), n).prop_map(|s| s.into_iter().collect())
}

pub fn store() -> impl Strategy<Value = DescriptorStore> {
    (1usize..12, 0usize..20).prop_flat_map(|(dim, n)| {
        (unique_ids(n), proptest::collection::vec(proptest::collection::vec(finite(), dim), n)).prop_map(
            move |(ids, values)| {
                let mut s = DescriptorStore::new(dim).unwrap();
                for (id, v) in ids.into_iter().zip(values) {
                    s.push(id, v).unwrap();
                }
                s
            },
        )
    })
}

pub fn pose() -> impl Strategy<Value = GeoPose> {
    (-90.0..=90.0f64, -180.0..=180.0f64).prop_map(|(lat, lon)| GeoPose::new(lat, lon).unwrap())
}

fn unit_vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0..1.0f64, dim)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
        .prop_map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
}

pub fn database() -> impl Strategy<Value = GeoDatabase> {
    (1usize..10, 1usize..25).prop_flat_map(|(dim, n)| {
        (
            unique_ids(n),
            proptest::collection::vec(pose(), n),
            proptest::collection::vec(unit_vector(dim), n),
        )
            .prop_map(|(ids, poses, e)| GeoDatabase::build(ids, poses, e).unwrap())
    })
}

pub fn model() -> impl Strategy<Value = EmbeddingModel> {
    (1usize..12, 1usize..12).prop_flat_map(|(a, b)| {
        let (d_in, d_out) = (a.max(b), a.min(b));
        (
            proptest::collection::vec(finite(), d_in * d_out),
            1e-6..10.0f64,
            prop_oneof![Just(1e-12), 1e-300..1e-3f64],
        )
            .prop_map(move |(w, margin, eps)| EmbeddingModel::new(d_in, d_out, w, margin, eps).unwrap())
    })
}

fn fraction() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..=1.0f64, Just(0.0), Just(1.0), Just(1.0 / 3.0)]
}

pub fn report() -> impl Strategy<Value = EvalReport> {
    let outcome = (ident(), ident(), 0.0..2e7f64, proptest::option::of(1usize..100)).prop_map(|(q, t, e, r)| {
        QueryOutcome {
            query_id: q,
            top1_id: t,
            top1_error_m: e,
            best_rank: r,
        }
    });
    (
        0.1..100.0f64,
        proptest::collection::vec((0.1..1e4f64, fraction()), 0..10),
        proptest::collection::vec((1usize..1000, fraction()), 0..10),
        proptest::collection::vec(outcome, 0..8),
    )
        .prop_map(|(tau, d, n, per_query)| EvalReport {
            well_localized_m: tau,
            recall_at_d: d,
            recall_at_n: n,
            per_query,
        })
}

/// Runs the CLI in-process; panics with its stderr on a non-zero exit.
pub fn semloc(args: &[&str]) -> String {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["semloc"];
    argv.extend_from_slice(args);
    let code = semloc::run(argv, &mut out, &mut err);
    assert_eq!(code, 0, "semloc {args:?} failed: {}", String::from_utf8_lossy(&err));
    String::from_utf8(out).unwrap()
}

/// synth → featurize → mine → train → index → evaluate on one channel of the
/// default dataset. Returns the training stdout.
pub fn cli_pipeline(dir: &Path, channel: &str) -> String {
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let ds = p("ds");
    semloc(&["synth", "--out", &ds]);
    semloc(&["featurize", "--maps", &format!("{ds}/{channel}/db"), "--out", &p("db.rds")]);
    semloc(&["mine", "--poses", &format!("{ds}/db_poses.csv"), "--seed", "1", "--out", &p("triplets.csv")]);
    let log = semloc(&[
        "train",
        "--raw",
        &p("db.rds"),
        "--triplets",
        &p("triplets.csv"),
        "--poses",
        &format!("{ds}/db_poses.csv"),
        "--seed",
        "3",
        "--out",
        &p("model.txt"),
    ]);
    semloc(&[
        "index",
        "--model",
        &p("model.txt"),
        "--raw",
        &p("db.rds"),
        "--poses",
        &format!("{ds}/db_poses.csv"),
        "--out",
        &p("db.gdb"),
    ]);
    semloc(&[
        "evaluate",
        "--index",
        &p("db.gdb"),
        "--model",
        &p("model.txt"),
        "--queries",
        &format!("{ds}/{channel}/query"),
        "--qposes",
        &format!("{ds}/query_poses.csv"),
        "--out",
        &p("report.toml"),
        "--csv",
        &p("report.csv"),
    ]);
    log
}
