//! C ABI over the recognition pipeline: an opaque store handle, status
//! codes, and JSON strings for structured results.
//!
//! Contract: every function is panic-safe (a caught panic reports
//! [`ParlingStatus::Internal`]); every returned string is owned by the
//! caller and released with [`parling_string_free`]; after any non-Ok
//! status, [`parling_last_error`] returns a message valid on the calling
//! thread until its next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use parling_core::audio::{extract_features, load_audio};
use parling_core::endpoint::endpoint_segments;
use parling_core::filter::{correction_weights, pooled_mean_log_energy, profile_segment};
use parling_core::recognizer::{enroll, recognize, RecognizerConfig, TemplateStore};
use parling_core::records::Record;
use parling_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParlingStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// File system failure (path in the error message).
    Io = 3,
    /// Unreadable or unsupported audio.
    BadAudio = 4,
    /// An enrollment clip did not endpoint to exactly one word.
    NotIsolated = 5,
    /// The store holds no templates.
    NoTemplates = 6,
    /// The store file is malformed or from another schema version.
    BadStore = 7,
    /// Invalid configuration or spec value.
    BadConfig = 8,
    /// A panic or unclassified failure inside the library.
    Internal = 9,
}

/// Opaque recognizer state: enrolled templates plus the pipeline
/// configuration they were normalized under.
pub struct ParlingStore {
    templates: TemplateStore,
    cfg: RecognizerConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg
        .chars()
        .map(|c| if c == '\0' { ' ' } else { c })
        .collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("nul bytes stripped");
    });
}

fn status_of(e: &Error) -> ParlingStatus {
    match e {
        Error::Io(_) | Error::Wav(hound::Error::IoError(_)) => ParlingStatus::Io,
        Error::UnsupportedFormat(_) | Error::EmptyAudio(_) | Error::Wav(_) => {
            ParlingStatus::BadAudio
        }
        Error::EnrollmentNotIsolated { .. } | Error::EmptyInput | Error::EmptySegment => {
            ParlingStatus::NotIsolated
        }
        Error::NoTemplates => ParlingStatus::NoTemplates,
        Error::StoreFormat(_) => ParlingStatus::BadStore,
        Error::Config(_) | Error::InvalidSpec { .. } | Error::InvalidVariable { .. } => {
            ParlingStatus::BadConfig
        }
        Error::InSegment { source, .. } => status_of(source),
        _ => ParlingStatus::Internal,
    }
}

fn fail(e: &Error) -> ParlingStatus {
    set_error(&e.to_string());
    status_of(e)
}

/// Run a body under a panic guard, mapping panics to `Internal`.
fn guarded(body: impl FnOnce() -> ParlingStatus) -> ParlingStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            ParlingStatus::Internal
        }
    }
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, ParlingStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(ParlingStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        ParlingStatus::InvalidUtf8
    })
}

fn give_string(s: String, out: *mut *mut c_char) -> ParlingStatus {
    let sanitized: String = s.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    let c = CString::new(sanitized).expect("nul bytes stripped");
    unsafe { *out = c.into_raw() };
    ParlingStatus::Ok
}

/// Message for the calling thread's most recent failure; empty if none.
/// The pointer stays valid until this thread's next failing call.
#[no_mangle]
pub extern "C" fn parling_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or an unreleased string obtained from this library.
#[no_mangle]
pub unsafe extern "C" fn parling_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Create an empty store with the default pipeline configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn parling_store_new(out: *mut *mut ParlingStore) -> ParlingStatus {
    if out.is_null() {
        set_error("null out pointer");
        return ParlingStatus::NullArgument;
    }
    guarded(|| {
        let store = Box::new(ParlingStore {
            templates: TemplateStore::default(),
            cfg: RecognizerConfig::default(),
        });
        unsafe { *out = Box::into_raw(store) };
        ParlingStatus::Ok
    })
}

/// Open a store file written by `parling_store_save` (or the CLI).
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn parling_store_open(
    path: *const c_char,
    out: *mut *mut ParlingStore,
) -> ParlingStatus {
    if out.is_null() {
        set_error("null out pointer");
        return ParlingStatus::NullArgument;
    }
    let path = match unsafe { utf8_arg(path) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    guarded(|| match TemplateStore::load(Path::new(path)) {
        Ok(templates) => {
            let store = Box::new(ParlingStore {
                templates,
                cfg: RecognizerConfig::default(),
            });
            unsafe { *out = Box::into_raw(store) };
            ParlingStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// Write the store to `path` as versioned JSON.
///
/// # Safety
/// `store` must be a live handle and `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn parling_store_save(
    store: *const ParlingStore,
    path: *const c_char,
) -> ParlingStatus {
    let Some(store) = (unsafe { store.as_ref() }) else {
        set_error("null store handle");
        return ParlingStatus::NullArgument;
    };
    let path = match unsafe { utf8_arg(path) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    guarded(|| match store.templates.save(Path::new(path)) {
        Ok(()) => ParlingStatus::Ok,
        Err(e) => fail(&e),
    })
}

/// Release a store handle. Null is a no-op.
///
/// # Safety
/// `store` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn parling_store_free(store: *mut ParlingStore) {
    if !store.is_null() {
        drop(unsafe { Box::from_raw(store) });
    }
}

/// Word and template counts of a store.
///
/// # Safety
/// `store` must be a live handle; count pointers may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn parling_store_stats(
    store: *const ParlingStore,
    words: *mut usize,
    templates: *mut usize,
) -> ParlingStatus {
    let Some(store) = (unsafe { store.as_ref() }) else {
        set_error("null store handle");
        return ParlingStatus::NullArgument;
    };
    if !words.is_null() {
        unsafe { *words = store.templates.words().len() };
    }
    if !templates.is_null() {
        unsafe { *templates = store.templates.templates.len() };
    }
    ParlingStatus::Ok
}

/// Enroll one isolated-word WAV clip under `word`. The clip must endpoint
/// to exactly one segment; on failure the store is unchanged.
///
/// # Safety
/// `store` must be a live handle; `word` and `wav_path` valid
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn parling_enroll_wav(
    store: *mut ParlingStore,
    word: *const c_char,
    wav_path: *const c_char,
) -> ParlingStatus {
    let Some(store) = (unsafe { store.as_mut() }) else {
        set_error("null store handle");
        return ParlingStatus::NullArgument;
    };
    let word = match unsafe { utf8_arg(word) } {
        Ok(w) => w,
        Err(status) => return status,
    };
    let wav_path = match unsafe { utf8_arg(wav_path) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    guarded(|| {
        let clip = match load_audio(Path::new(wav_path)) {
            Ok(clip) => clip,
            Err(e) => return fail(&e),
        };
        let source = Path::new(wav_path)
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| wav_path.to_string());
        match enroll(&mut store.templates, word, &[(clip, source)], &store.cfg) {
            Ok(_) => ParlingStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Recognize every isolated word in a WAV clip. On Ok, `json_out` holds a
/// JSON array of tagged result records (free with `parling_string_free`).
///
/// # Safety
/// `store` must be a live handle, `wav_path` a valid NUL-terminated
/// string, and `json_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn parling_recognize_wav(
    store: *const ParlingStore,
    wav_path: *const c_char,
    json_out: *mut *mut c_char,
) -> ParlingStatus {
    let Some(store) = (unsafe { store.as_ref() }) else {
        set_error("null store handle");
        return ParlingStatus::NullArgument;
    };
    if json_out.is_null() {
        set_error("null out pointer");
        return ParlingStatus::NullArgument;
    }
    let wav_path = match unsafe { utf8_arg(wav_path) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    guarded(|| {
        let clip = match load_audio(Path::new(wav_path)) {
            Ok(clip) => clip,
            Err(e) => return fail(&e),
        };
        match recognize(&clip, &store.templates, &store.cfg) {
            Ok(results) => {
                let records: Vec<Record> = results.into_iter().map(Record::Result).collect();
                let json = serde_json::to_string(&records).expect("results serialize");
                give_string(json, json_out)
            }
            Err(e) => fail(&e),
        }
    })
}

/// Profile every segment of a WAV clip: crisp accent/speed/emphasis,
/// membership degrees, and correction weights, as a JSON array of tagged
/// profile records. A null `store` measures the clip against itself; a
/// non-empty store supplies the speed and level references.
///
/// # Safety
/// `store` must be null or a live handle, `wav_path` a valid
/// NUL-terminated string, and `json_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn parling_analyze_wav(
    store: *const ParlingStore,
    wav_path: *const c_char,
    json_out: *mut *mut c_char,
) -> ParlingStatus {
    if json_out.is_null() {
        set_error("null out pointer");
        return ParlingStatus::NullArgument;
    }
    let store = unsafe { store.as_ref() };
    let wav_path = match unsafe { utf8_arg(wav_path) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    guarded(|| {
        let cfg = store.map(|s| s.cfg.clone()).unwrap_or_default();
        let clip = match load_audio(Path::new(wav_path)) {
            Ok(clip) => clip,
            Err(e) => return fail(&e),
        };
        let frames = extract_features(&clip, &cfg.framing);
        let segments = endpoint_segments(&frames, &cfg.endpoint);
        if segments.is_empty() {
            return give_string("[]".to_string(), json_out);
        }
        let from_store =
            store.and_then(|s| Some((s.templates.mean_duration()?, s.templates.mean_energy()?)));
        let (reference, level) = from_store.unwrap_or_else(|| {
            let n: usize = segments.iter().map(|s| s.len()).sum();
            (
                n as f64 / segments.len() as f64,
                pooled_mean_log_energy(&segments),
            )
        });
        let mut records = Vec::with_capacity(segments.len());
        for (id, seg) in segments.iter().enumerate() {
            let profile = match profile_segment(seg, reference, level, &cfg.vars) {
                Ok(p) => p,
                Err(e) => return fail(&e),
            };
            let weights = correction_weights(&profile);
            records.push(Record::Profile {
                segment: id,
                profile,
                weights,
            });
        }
        let json = serde_json::to_string(&records).expect("profiles serialize");
        give_string(json, json_out)
    })
}

#[cfg(test)]
mod tests {
    use std::ptr;

    use super::*;
    use parling_core::audio::save_audio;
    use parling_core::synth::{build_enrollment_set, default_lexicon};

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    /// Two-word store on disk plus one enrollment WAV per word.
    fn fixture(dir: &Path) -> (CString, CString, CString) {
        let lexicon: Vec<_> = default_lexicon().into_iter().take(2).collect();
        let mut paths = Vec::new();
        for (label, clips) in build_enrollment_set(&lexicon, 42).unwrap() {
            let (clip, source) = &clips[2];
            let path = dir.join(source);
            save_audio(clip, &path).unwrap();
            paths.push((label, path));
        }
        let store_path = dir.join("store.json");
        (
            c(paths[0].1.to_str().unwrap()),
            c(paths[1].1.to_str().unwrap()),
            c(store_path.to_str().unwrap()),
        )
    }

    #[test]
    fn full_round_trip_over_the_c_surface() {
        let dir = tempfile::tempdir().unwrap();
        let (wav_a, wav_b, store_path) = fixture(dir.path());

        let mut store: *mut ParlingStore = ptr::null_mut();
        unsafe {
            assert_eq!(parling_store_new(&mut store), ParlingStatus::Ok);
            assert_eq!(
                parling_enroll_wav(store, c("scalar").as_ptr(), wav_a.as_ptr()),
                ParlingStatus::Ok
            );
            assert_eq!(
                parling_enroll_wav(store, c("tensor").as_ptr(), wav_b.as_ptr()),
                ParlingStatus::Ok
            );

            let (mut words, mut templates) = (0usize, 0usize);
            assert_eq!(
                parling_store_stats(store, &mut words, &mut templates),
                ParlingStatus::Ok
            );
            assert_eq!((words, templates), (2, 2));

            assert_eq!(
                parling_store_save(store, store_path.as_ptr()),
                ParlingStatus::Ok
            );
            parling_store_free(store);

            let mut reopened: *mut ParlingStore = ptr::null_mut();
            assert_eq!(
                parling_store_open(store_path.as_ptr(), &mut reopened),
                ParlingStatus::Ok
            );

            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(
                parling_recognize_wav(reopened, wav_a.as_ptr(), &mut json),
                ParlingStatus::Ok
            );
            let text = CStr::from_ptr(json).to_str().unwrap().to_string();
            parling_string_free(json);
            let records: Vec<Record> = serde_json::from_str(&text).unwrap();
            match &records[..] {
                [Record::Result(r)] => assert_eq!(r.top().word, "scalar"),
                other => panic!("unexpected records: {other:?}"),
            }

            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(
                parling_analyze_wav(reopened, wav_a.as_ptr(), &mut json),
                ParlingStatus::Ok
            );
            let text = CStr::from_ptr(json).to_str().unwrap().to_string();
            parling_string_free(json);
            let records: Vec<Record> = serde_json::from_str(&text).unwrap();
            assert!(matches!(records[0], Record::Profile { segment: 0, .. }));

            parling_store_free(reopened);
        }
    }

    #[test]
    fn status_codes_and_last_error() {
        let dir = tempfile::tempdir().unwrap();
        let (wav_a, _, _) = fixture(dir.path());

        unsafe {
            let mut store: *mut ParlingStore = ptr::null_mut();
            assert_eq!(parling_store_new(&mut store), ParlingStatus::Ok);

            // Null and missing-file arguments.
            assert_eq!(
                parling_enroll_wav(store, ptr::null(), wav_a.as_ptr()),
                ParlingStatus::NullArgument
            );
            assert_eq!(
                parling_enroll_wav(store, c("w").as_ptr(), c("/no/such.wav").as_ptr()),
                ParlingStatus::Io
            );
            let msg = CStr::from_ptr(parling_last_error()).to_str().unwrap();
            assert!(!msg.is_empty());

            // Empty store cannot recognize.
            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(
                parling_recognize_wav(store, wav_a.as_ptr(), &mut json),
                ParlingStatus::NoTemplates
            );

            // A silent clip is not an isolated word.
            let silent = dir.path().join("silent.wav");
            save_audio(
                &parling_core::audio::AudioClip {
                    samples: vec![0.0; 16_000],
                    sample_rate: 16_000,
                },
                &silent,
            )
            .unwrap();
            assert_eq!(
                parling_enroll_wav(store, c("w").as_ptr(), c(silent.to_str().unwrap()).as_ptr()),
                ParlingStatus::NotIsolated
            );

            // Malformed store file.
            let bad = dir.path().join("bad.json");
            std::fs::write(&bad, "not json").unwrap();
            let mut opened: *mut ParlingStore = ptr::null_mut();
            assert_eq!(
                parling_store_open(c(bad.to_str().unwrap()).as_ptr(), &mut opened),
                ParlingStatus::BadStore
            );

            parling_store_free(store);
        }
    }

    #[test]
    fn analyze_without_a_store_self_references() {
        let dir = tempfile::tempdir().unwrap();
        let (wav_a, _, _) = fixture(dir.path());
        unsafe {
            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(
                parling_analyze_wav(ptr::null(), wav_a.as_ptr(), &mut json),
                ParlingStatus::Ok
            );
            let text = CStr::from_ptr(json).to_str().unwrap().to_string();
            parling_string_free(json);
            let records: Vec<Record> = serde_json::from_str(&text).unwrap();
            // Single segment against itself: exactly neutral speed.
            match &records[0] {
                Record::Profile { profile, .. } => {
                    assert_eq!(profile.speed.crisp, 0.0);
                    assert_eq!(profile.speed.normal, 1.0);
                }
                other => panic!("unexpected record: {other:?}"),
            }
        }
    }
}
