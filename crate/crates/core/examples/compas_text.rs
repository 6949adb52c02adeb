//! Turns tabular COMPAS rows into sentences and runs a short unpaired audit.

use std::collections::HashMap;

use xai_disparity::attribution::Method;
use xai_disparity::dataset::{
    compas_row_to_text, AuditDataset, CompasRow, Subgroups, UnpairedRecord, FEMALE, MALE,
};
use xai_disparity::metrics::Metric;
use xai_disparity::pipeline::{run_audit, AuditConfig};
use xai_disparity::report::{render_bias, render_grid};

fn main() -> xai_disparity::Result<()> {
    let header = [
        "Two_yr_Recidivism",
        "Number_of_Priors",
        "score_factor",
        "Age_Above_FourtyFive",
        "Age_Below_TwentyFive",
        "African_American",
        "Asian",
        "Hispanic",
        "Native_American",
        "Other",
        "Female",
        "Misdemeanor",
    ];
    let raw = ["1", "3", "1", "0", "1", "1", "0", "0", "0", "0", "0", "0"];
    let fields: HashMap<&str, &str> = header.iter().copied().zip(raw).collect();
    let row = CompasRow::from_fields(&fields)?;
    println!("{}\n", compas_row_to_text(&row));

    let races = ["African American", "Caucasian", "Hispanic", "Asian"];
    let records: Vec<UnpairedRecord> = (0..240u32)
        .map(|i| {
            let row = CompasRow {
                priors: (i * 7) % 9,
                score_factor: u32::from(i % 3 == 0),
                under_45: i % 4 != 0,
                under_25: i % 5 == 0,
                race: races[(i % 4) as usize].into(),
                sex: if i % 2 == 0 { "male" } else { "female" }.into(),
                misdemeanor: i % 6 == 1,
            };
            UnpairedRecord {
                id: format!("c{i}"),
                subgroup: if i % 2 == 0 { MALE } else { FEMALE }.into(),
                label: usize::from(row.priors >= 4),
                text: compas_row_to_text(&row),
            }
        })
        .collect();
    let data = AuditDataset::Unpaired {
        subgroups: Subgroups {
            a: MALE.into(),
            b: FEMALE.into(),
        },
        records,
    };

    let mut cfg = AuditConfig {
        methods: vec![Method::Gxi, Method::Lime],
        metrics: vec![Metric::Comprehensiveness, Metric::Gini],
        runs: 2,
        ..AuditConfig::default()
    };
    cfg.train.epochs = 60;
    cfg.train.warmup_steps = 30;
    let report = run_audit(&data, &cfg)?;
    print!("{}\n{}", render_grid(&report), render_bias(&report));
    Ok(())
}
