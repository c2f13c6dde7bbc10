use std::fs;

use approx::assert_abs_diff_eq;

use mcissa::panel::{label_range, rebase_index};
use mcissa::{load_panel, write_panel, Error, IngestOptions};

#[test]
fn load_from_disk_and_write_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prices.csv");
    fs::write(
        &path,
        "date, OIL ,GAS\n2015-12,80,40\n2016-01,100,50\n2016-02,120,50\n2017-01,90,60\n",
    )
    .unwrap();
    let panel = load_panel(&path, &IngestOptions::default()).unwrap();
    assert_eq!(panel.names(), ["OIL", "GAS"]);
    assert_eq!(panel.labels().unwrap()[1], "2016-01");

    let base = label_range(&panel, "2016").unwrap();
    assert_eq!(base, 1..3);
    let rebased = rebase_index(&panel, base).unwrap();
    let want = [80.0, 100.0, 120.0, 90.0].map(|v| v / 110.0 * 100.0);
    for (got, want) in rebased.series(0).iter().zip(want) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
    assert_eq!(rebased.series(1)[1], 100.0);

    let out = dir.path().join("copy.csv");
    write_panel(&rebased, fs::File::create(&out).unwrap()).unwrap();
    let back = load_panel(&out, &IngestOptions::default()).unwrap();
    assert_eq!(back.labels(), rebased.labels());
    assert_eq!(back.values(), rebased.values());
}

#[test]
fn custom_label_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    fs::write(&path, "month,a\nm1,1\nm2,2\nm3,3\nm4,5\n").unwrap();
    let opts = IngestOptions {
        label_column: "month".into(),
    };
    let panel = load_panel(&path, &opts).unwrap();
    assert_eq!(panel.dim(), 1);
    assert_eq!(panel.labels().unwrap(), ["m1", "m2", "m3", "m4"]);
    // Without the option the label column is just a bad numeric column.
    let err = load_panel(&path, &IngestOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Cell { row: 2, column: 1, .. }), "{err}");
}
