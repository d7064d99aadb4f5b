//! Human-readable summary and aggregated tables built from a run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::HarnessResult;
use crate::plot;
use crate::results::*;
use crate::store::RunStore;

pub const REPORT_MD: &str = "report.md";
pub const SUMMARY_JSON: &str = "summary.json";

/// Mean and spread of one metric over runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub table: String,
    pub group: Vec<(String, String)>,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub aggregates: Vec<Aggregate>,
    pub markdown: String,
}

impl Report {
    /// Mean of `metric` in `table` for the group whose key/value pairs include all of `filter`.
    pub fn find(&self, table: &str, metric: &str, filter: &[(&str, &str)]) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| {
            a.table == table
                && a.metric == metric
                && filter.iter().all(|(k, v)| a.group.iter().any(|(gk, gv)| gk == k && gv == v))
        })
    }
}

fn pm(values: &[f64]) -> String {
    let (m, s) = mean_std(values);
    format!("{m:.3} ± {s:.3}")
}

type Groups = BTreeMap<Vec<String>, Vec<f64>>;

fn push(groups: &mut Groups, key: Vec<String>, value: f64) {
    groups.entry(key).or_default().push(value);
}

fn aggregates(table: &str, names: &[&str], groups: &Groups) -> Vec<Aggregate> {
    groups
        .iter()
        .map(|(key, values)| {
            let (mean, std) = mean_std(values);
            let (metric, group) = key.split_last().expect("metric key");
            Aggregate {
                table: table.into(),
                group: names.iter().map(|n| n.to_string()).zip(group.iter().cloned()).collect(),
                metric: metric.clone(),
                mean,
                std,
                runs: values.len(),
            }
        })
        .collect()
}

fn table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}|", vec!["---"; header.len()].join("|"));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

fn s(x: impl ToString) -> String {
    x.to_string()
}

/// Reads every table present in the run directory and writes `report.md`,
/// `summary.json` and the plots.
pub fn write_report(store: &RunStore) -> HarnessResult<Report> {
    let mut md = String::from("# Experiment report\n\n");
    let mut aggs = Vec::new();

    if let Some(ds) = store.read_json::<Vec<DatasetSummary>>(DATASETS_JSON)? {
        md.push_str("## Datasets\n\n");
        let rows: Vec<Vec<String>> = ds
            .iter()
            .map(|d| {
                vec![
                    d.name.clone(),
                    s(d.graphs),
                    s(d.classes),
                    format!("{:.2}", d.avg_nodes),
                    format!("{:.2}", d.avg_edges),
                    s(d.max_nodes),
                ]
            })
            .collect();
        let header = ["dataset", "graphs", "classes", "avg nodes", "avg edges", "max nodes"].map(s);
        table(&mut md, &header, &rows);
    }

    let targets: Vec<TargetRow> = store.read_csv(TARGETS_CSV)?;
    if !targets.is_empty() {
        md.push_str("## Target models\n\nClassification accuracy on held-out graphs.\n\n");
        let mut g = Groups::new();
        for r in &targets {
            push(&mut g, vec![r.dataset.clone(), r.pooling.clone(), "test_accuracy".into()], r.test_accuracy);
        }
        let rows = g.iter().map(|(k, v)| vec![k[0].clone(), k[1].clone(), pm(v)]).collect::<Vec<_>>();
        table(&mut md, &["dataset", "pooling", "accuracy"].map(s), &rows);
        aggs.extend(aggregates("target", &["dataset", "pooling"], &g));
    }

    let property: Vec<PropertyRow> = store.read_csv(PROPERTY_CSV)?;
    if !property.is_empty() {
        md.push_str("## Property inference\n\nAttack accuracy against the random and summarize baselines.\n\n");
        let mut g = Groups::new();
        for r in &property {
            let k = vec![r.dataset.clone(), r.pooling.clone(), s(r.k), r.property.clone(), r.method.clone()];
            push(&mut g, k, r.accuracy);
        }
        let mut cells: BTreeMap<(String, String, String), Vec<Vec<String>>> = BTreeMap::new();
        let mut bars: BTreeMap<(String, String, String), Vec<(String, [f64; 3])>> = BTreeMap::new();
        let by = |k: &[String], m: &str| {
            let mut key = k[..4].to_vec();
            key.push(m.into());
            g.get(&key).cloned().unwrap_or_default()
        };
        for key in g.keys().filter(|k| k[4] == "attack") {
            let (a, r, sm) = (by(key, "attack"), by(key, "random"), by(key, "summarize"));
            let am = mean_std(&a).0;
            let beats = am > mean_std(&r).0 && am > mean_std(&sm).0;
            let cell = (key[0].clone(), key[1].clone(), key[2].clone());
            cells
                .entry(cell.clone())
                .or_default()
                .push(vec![key[3].clone(), pm(&a), pm(&r), pm(&sm), s(if beats { "yes" } else { "no" })]);
            bars.entry(cell).or_default().push((key[3].clone(), [am, mean_std(&r).0, mean_std(&sm).0]));
        }
        for ((d, p, k), rows) in &cells {
            let _ = writeln!(md, "### {d} / {p} / k = {k}\n");
            table(&mut md, &["property", "attack", "random", "summarize", "above baselines"].map(s), rows);
        }
        for ((d, p, k), b) in &bars {
            plot::grouped_bars(
                &store.path(&format!("plots/property-{d}-{p}-k{k}.svg")),
                &format!("Property inference, {d}, {p}, k = {k}"),
                b,
                &["attack", "random", "summarize"],
                "accuracy",
            )?;
        }
        aggs.extend(aggregates("property", &["dataset", "pooling", "k", "property"], &g));
    }

    let subgraph: Vec<SubgraphRow> = store.read_csv(SUBGRAPH_CSV)?;
    if !subgraph.is_empty() {
        md.push_str("## Subgraph inference\n\nAUC per aggregation strategy (rows) and sampling ratio (columns).\n\n");
        let mut g = Groups::new();
        for r in &subgraph {
            let k = vec![r.dataset.clone(), r.pooling.clone(), r.sampler.clone(), r.arm.clone(), s(r.ratio), r.strategy.clone(), "auc".into()];
            push(&mut g, k, r.auc);
        }
        let mut cells: BTreeMap<Vec<String>, BTreeMap<String, BTreeMap<String, Vec<f64>>>> = BTreeMap::new();
        for (k, v) in &g {
            cells.entry(k[..4].to_vec()).or_default().entry(k[5].clone()).or_default().insert(k[4].clone(), v.clone());
        }
        for (cell, strategies) in &cells {
            let _ = writeln!(md, "### {} / {} / {} / {}\n", cell[0], cell[1], cell[2], cell[3]);
            let mut ratios: Vec<String> = strategies.values().flat_map(|m| m.keys().cloned()).collect();
            ratios.sort_by(|a, b| a.parse::<f64>().unwrap_or(0.0).total_cmp(&b.parse::<f64>().unwrap_or(0.0)));
            ratios.dedup();
            let mut header = vec![s("strategy")];
            header.extend(ratios.iter().cloned());
            let rows: Vec<Vec<String>> = strategies
                .iter()
                .map(|(st, m)| {
                    let mut row = vec![st.clone()];
                    row.extend(ratios.iter().map(|r| m.get(r).map_or(s("-"), |v| pm(v))));
                    row
                })
                .collect();
            table(&mut md, &header, &rows);
            let names: Vec<&str> = strategies.keys().map(String::as_str).collect();
            let bars: Vec<(String, Vec<f64>)> = ratios
                .iter()
                .map(|r| {
                    (r.clone(), strategies.values().map(|m| m.get(r).map_or(0.0, |v| mean_std(v).0)).collect())
                })
                .collect();
            plot::grouped_bars_dyn(
                &store.path(&format!("plots/subgraph-{}.svg", cell.join("-"))),
                &format!("Subgraph inference AUC, {}", cell.join(" / ")),
                &bars,
                &names,
                "AUC",
            )?;
        }
        aggs.extend(aggregates("subgraph", &["dataset", "pooling", "sampler", "arm", "ratio", "strategy"], &g));
    }

    let recon: Vec<ReconstructionRow> = store.read_csv(RECONSTRUCTION_CSV)?;
    if !recon.is_empty() {
        md.push_str("## Graph reconstruction\n\n");
        let mut g = Groups::new();
        for r in &recon {
            push(&mut g, vec![r.dataset.clone(), r.pooling.clone(), r.metric.clone()], r.value);
        }
        let mut poolings: Vec<String> = recon.iter().map(|r| r.pooling.clone()).collect();
        poolings.sort();
        poolings.dedup();
        let mut datasets: Vec<String> = recon.iter().map(|r| r.dataset.clone()).collect();
        datasets.sort();
        datasets.dedup();
        md.push_str("### WL kernel\n\n");
        let mut header = vec![s("dataset")];
        header.extend(poolings.iter().cloned());
        let cell = |d: &str, p: &str, m: &str| g.get(&vec![s(d), s(p), s(m)]).map_or(s("-"), |v| pm(v));
        let rows: Vec<Vec<String>> = datasets
            .iter()
            .map(|d| {
                let mut row = vec![d.clone()];
                row.extend(poolings.iter().map(|p| cell(d, p, "wl")));
                row
            })
            .collect();
        table(&mut md, &header, &rows);
        for measure in ["cosine", "wasserstein", "js"] {
            let _ = writeln!(md, "### Statistic distributions, {measure}\n");
            let stats = ["degree", "lcc", "bc", "cc"];
            let mut header = vec![s("dataset"), s("pooling")];
            header.extend(stats.iter().map(s));
            let mut rows = Vec::new();
            for d in &datasets {
                for p in &poolings {
                    let mut row = vec![d.clone(), p.clone()];
                    row.extend(stats.iter().map(|st| cell(d, p, &format!("{st}_{measure}"))));
                    rows.push(row);
                }
            }
            table(&mut md, &header, &rows);
        }
        aggs.extend(aggregates("reconstruction", &["dataset", "pooling"], &g));
    }

    let defense: Vec<DefenseRow> = store.read_csv(DEFENSE_CSV)?;
    if !defense.is_empty() {
        md.push_str("## Laplace defense\n\nMetrics per noise scale β; `clean` is the undefended release.\n\n");
        let mut g = Groups::new();
        for r in &defense {
            let beta = r.beta.map_or(s("clean"), s);
            push(&mut g, vec![r.dataset.clone(), r.pooling.clone(), beta, r.metric.clone()], r.value);
        }
        let mut cells: BTreeMap<(String, String), BTreeMap<String, BTreeMap<String, Vec<f64>>>> = BTreeMap::new();
        for (k, v) in &g {
            cells
                .entry((k[0].clone(), k[1].clone()))
                .or_default()
                .entry(k[3].clone())
                .or_default()
                .insert(k[2].clone(), v.clone());
        }
        for ((d, p), metrics) in &cells {
            let _ = writeln!(md, "### {d} / {p}\n");
            let mut betas: Vec<String> = metrics.values().flat_map(|m| m.keys().cloned()).collect();
            betas.sort_by(|a, b| {
                let f = |x: &str| x.parse::<f64>().unwrap_or(f64::NEG_INFINITY);
                f(a).total_cmp(&f(b))
            });
            betas.dedup();
            let shown: Vec<&String> = metrics.keys().filter(|m| !m.contains(':')).collect();
            let mut header = vec![s("β")];
            header.extend(shown.iter().map(s));
            let rows: Vec<Vec<String>> = betas
                .iter()
                .map(|b| {
                    let mut row = vec![b.clone()];
                    row.extend(shown.iter().map(|m| metrics[*m].get(b).map_or(s("-"), |v| pm(v))));
                    row
                })
                .collect();
            table(&mut md, &header, &rows);
            let series: Vec<(String, Vec<(f64, f64)>)> = shown
                .iter()
                .map(|m| {
                    let pts = metrics[*m]
                        .iter()
                        .filter_map(|(b, v)| b.parse::<f64>().ok().map(|x| (x, mean_std(v).0)))
                        .collect::<Vec<_>>();
                    (s(m), pts)
                })
                .collect();
            plot::lines(
                &store.path(&format!("plots/defense-{d}-{p}.svg")),
                &format!("Laplace defense, {d}, {p}"),
                &series,
                "β",
            )?;
        }
        aggs.extend(aggregates("defense", &["dataset", "pooling", "beta"], &g));
    }

    let transfer: Vec<TransferRow> = store.read_csv(TRANSFER_CSV)?;
    if !transfer.is_empty() {
        md.push_str("## Transferability\n\n");
        let mut g = Groups::new();
        for r in &transfer {
            let k = vec![r.axis.clone(), r.attack.clone(), r.dataset.clone(), r.pooling.clone(), r.from.clone(), r.to.clone(), r.metric.clone()];
            push(&mut g, k, r.value);
        }
        let rows: Vec<Vec<String>> = g
            .iter()
            .map(|(k, v)| vec![k[0].clone(), k[1].clone(), k[2].clone(), k[3].clone(), format!("{} → {}", k[4], k[5]), k[6].clone(), pm(v)])
            .collect();
        table(&mut md, &["axis", "attack", "dataset", "pooling", "transfer", "metric", "value"].map(s), &rows);
        aggs.extend(aggregates("transfer", &["axis", "attack", "dataset", "pooling", "from", "to"], &g));
    }

    let report = Report {
        aggregates: aggs,
        markdown: md,
    };
    store.write_text(REPORT_MD, &report.markdown)?;
    store.write_json(SUMMARY_JSON, &report.aggregates)?;
    Ok(report)
}
