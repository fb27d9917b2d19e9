use ndarray::Array2;
use tsxai_core::data::{build_lagged, log_returns, read_csv, read_dataset_csv, split, write_dataset_csv};
use tsxai_core::net::{FeedforwardNet, NetArchitecture, NetDocument, TrainingScaling};
use tsxai_core::{synth, Error};

fn prices_csv(rows: &[(&str, f64)]) -> String {
    let mut s = String::from("date,close\n");
    for (d, v) in rows {
        s.push_str(&format!("{d},{v}\n"));
    }
    s
}

#[test]
fn ten_prices_two_lags_give_seven_return_rows() {
    let rows: Vec<(String, f64)> = (1..=10).map(|d| (format!("2021-03-{d:02}"), 100.0 + d as f64)).collect();
    let refs: Vec<(&str, f64)> = rows.iter().map(|(d, v)| (d.as_str(), *v)).collect();
    let series = read_csv(prices_csv(&refs).as_bytes(), "close").unwrap();
    let lagged = build_lagged(&series, 2).unwrap();
    assert_eq!(lagged.rows(), 8);
    let returns = log_returns(&series).unwrap();
    assert_eq!(build_lagged(&returns, 2).unwrap().rows(), 7);
}

#[test]
fn unsorted_input_is_ordered_and_duplicates_rejected() {
    let csv = prices_csv(&[("2021-01-03", 3.0), ("2021-01-01", 1.0), ("2021-01-02", 2.0)]);
    let s = read_csv(csv.as_bytes(), "close").unwrap();
    assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
    let dup = prices_csv(&[("2021-01-01", 1.0), ("2021-01-01", 2.0)]);
    assert!(matches!(read_csv(dup.as_bytes(), "close"), Err(Error::DuplicateTimestamp(_))));
}

#[test]
fn bad_rows_are_named() {
    let csv = prices_csv(&[("2021-01-01", 1.0), ("2021-13-01", 2.0)]);
    let err = read_csv(csv.as_bytes(), "close").unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    assert!(err.is_data_error());
}

#[test]
fn dataset_csv_round_trips_exactly() {
    let prices = synth::synthetic_prices(400, 5);
    let returns = log_returns(&prices).unwrap();
    let data = build_lagged(&returns, 4).unwrap();
    let mut buf = Vec::new();
    write_dataset_csv(&data, &mut buf).unwrap();
    let back = read_dataset_csv(buf.as_slice(), Some((data.scaling_x(), data.scaling_y()))).unwrap();
    assert_eq!(back.raw_x(), data.raw_x());
    assert_eq!(back.x(), data.x());
    assert_eq!(back.fingerprint(), data.fingerprint());
}

#[test]
fn split_reuses_in_sample_scaling() {
    let returns = log_returns(&synth::synthetic_prices(300, 2)).unwrap();
    let data = build_lagged(&returns, 3).unwrap();
    let boundary = data.dates()[199];
    let (a, b) = split(&data, boundary).unwrap();
    assert_eq!(a.rows(), 200);
    assert_eq!(b.rows(), data.rows() - 200);
    assert_eq!(b.scaling_x(), a.scaling_x());
    assert!(a.x().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(split(&data, *data.dates().last().unwrap()).is_err());
}

#[test]
fn net_documents_round_trip_bit_exactly() {
    let arch = NetArchitecture::sigmoid(vec![6, 100, 1]).unwrap();
    assert_eq!((arch.weight_count(), arch.bias_count()), (700, 101));
    let net = FeedforwardNet::init_random(arch, 99);
    let data = build_lagged(&log_returns(&synth::synthetic_prices(50, 1)).unwrap(), 6).unwrap();
    let scaling = TrainingScaling {
        x: data.scaling_x(),
        y: data.scaling_y(),
    };
    let doc = NetDocument::from_net(&net, Some(99), Some(scaling));
    let json = doc.to_json().unwrap();
    let back = NetDocument::from_json(&json).unwrap();
    assert_eq!(back.to_net().unwrap(), net);
    assert_eq!(back.to_json().unwrap(), json);
    let x = Array2::from_elem((3, 6), 0.25);
    assert_eq!(back.to_net().unwrap().predict_series(x.view()).unwrap(), net.predict_series(x.view()).unwrap());
}
