use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use collarnet::nn::{checkpoint, ArchName, Model, ModelParams};
use collarnet_ffi::*;

fn last_error() -> String {
    let p = cn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn synth(json: &str) -> *mut CnWaveform {
    let spec = CString::new(json).unwrap();
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { cn_synth(spec.as_ptr(), &mut w) }, CnStatus::Ok);
    w
}

fn marks_of(w: *const CnWaveform) -> Vec<usize> {
    let mut n = 0;
    unsafe {
        assert_eq!(cn_waveform_marks(w, ptr::null_mut(), 0, &mut n), CnStatus::Ok);
        let mut out = vec![0usize; n];
        assert_eq!(cn_waveform_marks(w, out.as_mut_ptr(), out.len(), &mut n), CnStatus::Ok);
        out
    }
}

#[test]
fn synth_write_read_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let w = synth(r#"{"seed": 4, "duration_s": 10.0}"#);
    assert_eq!(unsafe { cn_waveform_len(w) }, 10_000);
    let stem = CString::new(dir.path().join("w").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(cn_waveform_write(w, stem.as_ptr()), CnStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(cn_waveform_read(stem.as_ptr(), &mut back), CnStatus::Ok);
        assert_eq!(marks_of(w), marks_of(back));
        assert!(!marks_of(w).is_empty());
        cn_waveform_free(back);
        cn_waveform_free(w);
    }
}

#[test]
fn buffer_protocol_reports_size() {
    let samples = [1.0, 2.0, 4.0, 8.0];
    let mut w = ptr::null_mut();
    unsafe {
        assert_eq!(cn_waveform_new(samples.as_ptr(), 4, 100.0, ptr::null(), 0, &mut w), CnStatus::Ok);
        let mut n = 0;
        let mut small = [0.0; 2];
        assert_eq!(cn_waveform_samples(w, small.as_mut_ptr(), 2, &mut n), CnStatus::BufferTooSmall);
        assert_eq!(n, 4);
        let mut full = [0.0; 4];
        assert_eq!(cn_waveform_samples(w, full.as_mut_ptr(), 4, &mut n), CnStatus::Ok);
        assert_eq!(full, samples);

        let mut z = ptr::null_mut();
        assert_eq!(cn_standardize(w, &mut z), CnStatus::Ok);
        assert_eq!(cn_waveform_samples(z, full.as_mut_ptr(), 4, &mut n), CnStatus::Ok);
        assert!(full.iter().sum::<f64>().abs() < 1e-12);
        cn_waveform_free(z);
        cn_waveform_free(w);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut w = ptr::null_mut();
    unsafe {
        assert_eq!(cn_waveform_new(ptr::null(), 3, 1000.0, ptr::null(), 0, &mut w), CnStatus::NullPointer);
        assert!(last_error().contains("samples"));
        let flat = [2.0; 5];
        assert_eq!(cn_waveform_new(flat.as_ptr(), 5, 1000.0, ptr::null(), 0, &mut w), CnStatus::Ok);
        let mut z = ptr::null_mut();
        assert_eq!(cn_standardize(w, &mut z), CnStatus::InvalidArgument);
        assert!(z.is_null());
        assert!(last_error().contains("standard deviation"));
        cn_waveform_free(w);

        let missing = CString::new("/nonexistent/stem").unwrap();
        assert_eq!(cn_waveform_read(missing.as_ptr(), &mut w), CnStatus::Io);
        let bad = CString::new(r#"{"collar_spacing_s": 0.05}"#).unwrap();
        assert_eq!(cn_synth(bad.as_ptr(), &mut w), CnStatus::InvalidArgument);
        let unknown = CString::new(r#"{"colar_spacing_s": 1.0}"#).unwrap();
        assert_eq!(cn_synth(unknown.as_ptr(), &mut w), CnStatus::InvalidArgument);
        cn_waveform_free(ptr::null_mut());
        cn_model_free(ptr::null_mut());
        assert_eq!(cn_waveform_len(ptr::null()), 0);
    }
}

#[test]
fn postprocess_and_match_worked_examples() {
    let map = [0.0, 0.0, 0.8, 0.9, 0.8, 0.0, 0.0];
    let mut centers = [0usize; 4];
    let mut n = 0;
    unsafe {
        assert_eq!(cn_postprocess(map.as_ptr(), map.len(), 0.5, 1, centers.as_mut_ptr(), 4, &mut n), CnStatus::Ok);
        assert_eq!(&centers[..n], &[3]);
        assert_eq!(cn_postprocess(map.as_ptr(), map.len(), 1.5, 1, centers.as_mut_ptr(), 4, &mut n), CnStatus::InvalidArgument);

        let mut r = CnMatchReport::default();
        let (p, t) = ([100usize, 200], [102usize, 300]);
        assert_eq!(cn_match_collars(p.as_ptr(), 2, t.as_ptr(), 2, 50, &mut r), CnStatus::Ok);
        assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 1));
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
        assert_eq!(cn_match_collars(ptr::null(), 0, t.as_ptr(), 1, 50, &mut r), CnStatus::Ok);
        assert_eq!((r.fn_, r.f1), (1, 0.0));
        let unsorted = [5usize, 1];
        assert_eq!(cn_match_collars(unsorted.as_ptr(), 2, t.as_ptr(), 2, 50, &mut r), CnStatus::UnsortedInput);
    }
}

#[test]
fn model_inference_matches_rust_api() {
    let dir = tempfile::tempdir().unwrap();
    let model: ModelParams = Model::new(ArchName::Man, 64, 3).unwrap();
    let path = dir.path().join("m.cclm");
    checkpoint::save(&model, &path).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let samples: Vec<f64> = (0..300).map(|i| (i as f64 * 0.07).sin()).collect();
    let expected = collarnet::infer::sliding_infer(&model, &samples, 1).unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(cn_model_load(cpath.as_ptr(), &mut m), CnStatus::Ok);
        assert_eq!(cn_model_window_len(m), 64);
        let mut w = ptr::null_mut();
        assert_eq!(cn_waveform_new(samples.as_ptr(), samples.len(), 1000.0, ptr::null(), 0, &mut w), CnStatus::Ok);
        let mut n = 0;
        assert_eq!(cn_sliding_infer(m, w, 1, ptr::null_mut(), 0, &mut n), CnStatus::Ok);
        let mut out = vec![0.0; n];
        assert_eq!(cn_sliding_infer(m, w, 2, out.as_mut_ptr(), n, &mut n), CnStatus::Ok);
        assert_eq!(out, expected.values);
        cn_waveform_free(w);
        cn_model_free(m);

        let garbage = dir.path().join("g.cclm");
        std::fs::write(&garbage, b"nope").unwrap();
        let g = CString::new(garbage.to_str().unwrap()).unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(cn_model_load(g.as_ptr(), &mut m), CnStatus::Format);
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("collarnet.h");
    let header = std::fs::read_to_string(&header_path).unwrap();
    for sym in ["cn_synth", "cn_sliding_infer", "cn_match_collars", "cn_last_error", "CN_STATUS_OK", "typedef struct CnModel CnModel"] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
    // Compile-check the header when a C compiler is around.
    let src = std::env::temp_dir().join("collarnet_header_check.c");
    std::fs::write(&src, "#include \"collarnet.h\"\nint main(void) { return cn_waveform_len(NULL) == 0 ? 0 : 1; }\n").unwrap();
    if let Ok(out) = Command::new("cc").arg("-fsyntax-only").arg("-I").arg(header_path.parent().unwrap()).arg(&src).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
