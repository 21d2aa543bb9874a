//! Ingestion of a small CESNET-style export (12 features, 10-minute grid).

use std::path::PathBuf;

use taskdiag::stream::{load_csv, read_csv, summarize, ChannelSelector, CsvSchema};
use taskdiag::taskify::fixed_length;

fn sample_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/cesnet_sample.csv")
}

#[test]
fn sample_loads_on_ten_minute_grid() {
    let s = load_csv(&sample_path(), &CsvSchema::default()).unwrap();
    assert_eq!(s.series_id(), "cesnet_sample");
    assert_eq!(s.step_duration(), 600);
    assert_eq!(s.n_channels(), 12);
    // Two dropped rows are filled back in.
    assert_eq!(s.t_steps(), 10 * 144);
    assert_eq!(s.start_time(), 1_696_809_600);
    assert_eq!(summarize(&s).duration_seconds, s.t_steps() as u64 * 600);
    assert_eq!(s.steps_per_day(), Some(144));
}

#[test]
fn default_channel_is_avg_duration() {
    let s = load_csv(&sample_path(), &CsvSchema::default()).unwrap();
    let idx = ChannelSelector::Target.resolve(&s).unwrap();
    assert_eq!(s.channel_names()[idx[0]], "avg_duration");
}

#[test]
fn filled_rows_are_interpolated() {
    let s = load_csv(&sample_path(), &CsvSchema::default()).unwrap();
    let x = s.channel(s.channel_index("avg_duration").unwrap());
    let step = (x[702] - x[699]) / 3.0;
    assert!((x[700] - (x[699] + step)).abs() < 1e-9);
    assert!((x[701] - (x[699] + 2.0 * step)).abs() < 1e-9);
}

#[test]
fn iso_timestamps_match_epoch_seconds() {
    let epoch = "id_time,avg_duration\n1696809600,1\n1696810200,2\n1696810800,4\n";
    let iso = "id_time,avg_duration\n2023-10-09T00:00:00Z,1\n2023-10-09 00:10:00,2\n2023-10-09T00:20:00+00:00,4\n";
    let a = read_csv(epoch.as_bytes(), &CsvSchema::default(), "ip").unwrap();
    let b = read_csv(iso.as_bytes(), &CsvSchema::default(), "ip").unwrap();
    assert_eq!(a, b);
}

#[test]
fn sample_splits_into_day_windows() {
    let s = load_csv(&sample_path(), &CsvSchema::default()).unwrap();
    let tk = fixed_length(&s, 3, 144).unwrap();
    // 10 days in 3-day windows; the 1-day remainder is kept.
    assert_eq!(tk.boundaries, vec![0, 432, 864, 1296, 1440]);
}
