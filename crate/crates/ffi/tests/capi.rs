use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use subext_ffi::*;

const SRT: &str = "1\n00:00:01,000 --> 00:00:02,500\nHello there\nsecond line\n\n2\n00:00:03,000 --> 00:00:04,000\n你好\n\n";

fn last_error() -> String {
    let p = subext_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    subext_string_free(s);
    out
}

#[test]
fn srt_round_trip_through_handles() {
    let text = CString::new(SRT).unwrap();
    let mut doc = ptr::null_mut();
    unsafe {
        assert_eq!(subext_srt_parse(text.as_ptr(), &mut doc), SubextStatus::Ok);
        assert!(subext_last_error().is_null());
        assert_eq!(subext_document_len(doc), 2);

        let (mut s, mut e, mut t) = (0u64, 0u64, ptr::null_mut());
        assert_eq!(subext_document_cue(doc, 0, &mut s, &mut e, &mut t), SubextStatus::Ok);
        assert_eq!((s, e, take(t).as_str()), (1000, 2500, "Hello there\nsecond line"));
        assert_eq!(subext_document_cue(doc, 2, &mut s, &mut e, &mut t), SubextStatus::InvalidArgument);

        let mut out = ptr::null_mut();
        assert_eq!(subext_srt_emit(doc, &mut out), SubextStatus::Ok);
        assert_eq!(take(out), SRT);
        subext_document_free(doc);
    }
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("1\n00:00:01.000 --> 00:00:02,000\nx\n").unwrap();
    let mut doc = ptr::null_mut();
    unsafe {
        assert_eq!(subext_srt_parse(bad.as_ptr(), &mut doc), SubextStatus::Parse);
        assert!(last_error().contains("00:00:01.000"), "{}", last_error());
        assert!(doc.is_null());
        assert_eq!(subext_srt_parse(ptr::null(), &mut doc), SubextStatus::NullPointer);
        assert_eq!(subext_srt_parse(bad.as_ptr(), ptr::null_mut()), SubextStatus::NullPointer);
        let not_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(subext_srt_parse(not_utf8.as_ptr().cast(), &mut doc), SubextStatus::InvalidUtf8);
        assert_eq!(subext_document_len(ptr::null()), 0);
        subext_document_free(ptr::null_mut());
        subext_string_free(ptr::null_mut());
    }
}

#[test]
fn metrics() {
    let a = CString::new("kitten").unwrap();
    let b = CString::new("sitting").unwrap();
    let text = CString::new(SRT).unwrap();
    let (mut d, mut ned, mut suber) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(subext_normalized_edit_distance(a.as_ptr(), b.as_ptr(), &mut d), SubextStatus::Ok);
        assert!((d - 3.0 / 7.0).abs() < 1e-15);
        assert_eq!(subext_evaluate(text.as_ptr(), text.as_ptr(), 1000, &mut ned, &mut suber), SubextStatus::Ok);
    }
    assert_eq!((ned, suber), (1.0, 0.0));
}

#[test]
fn refine_from_strings() {
    let preds = CString::new("<2><4>hello\n").unwrap();
    let ocr: String = (25..=65)
        .map(|f| format!("{{\"frame\": {f}, \"texts\": [\"hello\"]}}\n"))
        .collect();
    let ocr = CString::new(ocr).unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(subext_refine(preds.as_ptr(), ocr.as_ptr(), 30, 1, 0.8, 0, &mut out), SubextStatus::Ok);
        // frames 25 and 65 at 30 fps
        assert_eq!(take(out), "1\n00:00:00,833 --> 00:00:02,167\nhello\n\n");
        assert_eq!(subext_refine(preds.as_ptr(), ocr.as_ptr(), 30, 0, 0.8, 0, &mut out), SubextStatus::InvalidArgument);
        let bad = CString::new("<2>hello").unwrap();
        assert_eq!(subext_refine(bad.as_ptr(), ocr.as_ptr(), 30, 1, 0.8, 0, &mut out), SubextStatus::Parse);
    }
}

#[test]
fn s3_params_forward_and_grad_check() {
    let (n, h, w, c) = (3usize, 4usize, 4usize, 4usize);
    let frames: Vec<f64> = (0..n * h * w * c).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
    unsafe {
        let mut params = ptr::null_mut();
        assert_eq!(subext_s3_params_new(2, 2, 1, c, 3, false, 0, &mut params), SubextStatus::Ok);
        let rows = subext_s3_output_rows(params, n);
        assert_eq!(rows, 18);
        let mut out = vec![0.0; rows * 3];
        assert_eq!(
            subext_s3_forward(params, frames.as_ptr(), n, h, w, out.as_mut_ptr(), out.len()),
            SubextStatus::Ok
        );
        assert!(out.iter().any(|v| *v != 0.0));
        assert_eq!(
            subext_s3_forward(params, frames.as_ptr(), n, h, w, out.as_mut_ptr(), 5),
            SubextStatus::BufferTooSmall
        );

        let mut rel = 1.0;
        assert_eq!(
            subext_s3_grad_check(params, frames.as_ptr(), n, h, w, 1e-5, 1e-5, &mut rel),
            SubextStatus::Ok
        );
        assert!(rel < 1e-5);
        assert_eq!(
            subext_s3_grad_check(params, frames.as_ptr(), n, h, w, 1.0, 1e-12, &mut rel),
            SubextStatus::Invariant
        );

        // save, load, same output
        let mut len = 0;
        assert_eq!(subext_s3_params_save(params, ptr::null_mut(), 0, &mut len), SubextStatus::Ok);
        let mut buf = vec![0u8; len];
        assert_eq!(subext_s3_params_save(params, buf.as_mut_ptr(), 3, &mut len), SubextStatus::BufferTooSmall);
        assert_eq!(subext_s3_params_save(params, buf.as_mut_ptr(), buf.len(), &mut len), SubextStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(subext_s3_params_load(buf.as_ptr(), len, 2, 1, false, &mut loaded), SubextStatus::Ok);
        let mut again = vec![0.0; rows * 3];
        subext_s3_forward(loaded, frames.as_ptr(), n, h, w, again.as_mut_ptr(), again.len());
        assert_eq!(out, again);
        assert_eq!(subext_s3_params_load(buf.as_ptr(), 3, 2, 1, false, &mut loaded), SubextStatus::Parse);

        subext_s3_params_free(params);
        subext_s3_params_free(loaded);
    }
}

#[test]
fn corpus_rules() {
    assert_eq!(subext_filter_short_video(9.9, 20), SubextFilter::RejectDuration);
    assert_eq!(subext_filter_short_video(60.0, 4), SubextFilter::RejectTracklets);
    assert_eq!(subext_filter_short_video(60.0, 5), SubextFilter::Accept);

    let mut count = 0;
    unsafe {
        assert_eq!(subext_clip_movie(600.0, 3, ptr::null_mut(), 0, &mut count), SubextStatus::Ok);
        let mut bounds = vec![0.0; 2 * count];
        assert_eq!(subext_clip_movie(600.0, 3, bounds.as_mut_ptr(), count, &mut count), SubextStatus::Ok);
        assert_eq!(bounds[0], 0.0);
        assert_eq!(bounds[2 * count - 1], 600.0);
        for i in 1..count {
            assert_eq!(bounds[2 * i - 1], bounds[2 * i]);
        }
        assert_eq!(subext_clip_movie(10.0, 3, ptr::null_mut(), 0, &mut count), SubextStatus::InvalidArgument);
    }
}

fn find_static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let deps = exe.parent()?;
    [deps.parent()?.join("libsubext_ffi.a"), deps.join("libsubext_ffi.a")]
        .into_iter()
        .find(|p| p.is_file())
}

// Builds a C program against the generated header and the static library.
#[test]
fn c_program_links_against_header() {
    let Some(lib) = find_static_lib() else {
        eprintln!("static library not found next to the test binary; skipping");
        return;
    };
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "subext.h"

int main(void) {
    const char *srt = "1\n00:00:01,000 --> 00:00:02,000\nhi\n\n";
    SubextDocument *doc = NULL;
    if (subext_srt_parse(srt, &doc) != SUBEXT_STATUS_OK) return 1;
    char *out = NULL;
    if (subext_srt_emit(doc, &out) != SUBEXT_STATUS_OK) return 2;
    int same = strcmp(out, srt) == 0;
    subext_string_free(out);
    subext_document_free(doc);
    if (!same) return 3;
    if (subext_srt_parse("garbage", &doc) != SUBEXT_STATUS_PARSE) return 4;
    if (subext_last_error() == NULL) return 5;
    if (subext_filter_short_video(9.9, 20) != SUBEXT_FILTER_REJECT_DURATION) return 6;
    puts("ok");
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status();
    let Ok(status) = status else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
