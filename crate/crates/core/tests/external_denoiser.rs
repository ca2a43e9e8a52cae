use std::time::Duration;

use pgdpir::denoise::protocol::{read_frame, write_frame, Frame};
use pgdpir::denoise::{Denoiser, DenoiserSpec, ExternalDenoiser};
use pgdpir::{Error, ImageGrid};

fn image() -> ImageGrid {
    ImageGrid::from_fn(7, 5, |r, c| (r * 5 + c) as f64 / 37.0 + 1e-9)
}

#[test]
fn echo_server_round_trips_through_f32() {
    let mut d = ExternalDenoiser::spawn("cat", Duration::from_secs(10)).unwrap();
    let x = image();
    for sigma in [0.1, 0.01] {
        let out = d.denoise(&x, sigma).unwrap();
        assert_eq!(out, x.map(|v| v as f32 as f64));
    }
}

#[test]
fn truncated_reply_is_a_protocol_error() {
    let mut d = ExternalDenoiser::spawn("head -c 10", Duration::from_secs(10)).unwrap();
    let err = d.denoise(&image(), 0.05).unwrap_err();
    assert!(err.is_protocol(), "{err}");
}

#[test]
fn nonzero_exit_is_a_denoiser_error_with_stderr() {
    let mut d = ExternalDenoiser::spawn("echo model missing >&2; exit 3", Duration::from_secs(10)).unwrap();
    let err = d.denoise(&image(), 0.05).unwrap_err();
    match err {
        Error::Denoiser { stderr, .. } => assert!(stderr.contains("model missing")),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn silent_server_times_out() {
    let mut d = ExternalDenoiser::spawn("sleep 30", Duration::from_millis(300)).unwrap();
    let err = d.denoise(&image(), 0.05).unwrap_err();
    assert!(matches!(err, Error::Denoiser { .. }), "{err}");
}

#[test]
fn spec_builds_external_process() {
    let spec = DenoiserSpec::parse("external:cat").unwrap();
    let mut d = spec.build().unwrap();
    assert!(d.name().contains("cat"));
    assert_eq!(d.denoise(&image(), 0.2).unwrap().dims(), (7, 5));
}

#[test]
fn frames_survive_a_pipe() {
    let mut buf = Vec::new();
    let frames: Vec<Frame> = (0..50).map(|i| Frame::from_image(&ImageGrid::filled(1 + i % 4, 2, i as f64), 0.01 * i as f64)).collect();
    for f in &frames {
        write_frame(&mut buf, f).unwrap();
    }
    write_frame(&mut buf, &Frame::shutdown()).unwrap();
    let mut rd = buf.as_slice();
    for f in &frames {
        assert_eq!(&read_frame(&mut rd).unwrap().unwrap(), f);
    }
    assert!(read_frame(&mut rd).unwrap().unwrap().is_shutdown());
    assert!(read_frame(&mut rd).unwrap().is_none());
}
