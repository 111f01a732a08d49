//! Exercises the C surface the way a foreign caller would: through raw
//! pointers and status codes only.

use std::ffi::{CStr, CString};
use std::ptr;

use autosample_ffi::*;

fn last_error() -> String {
    let ptr = autosample_last_error_message();
    assert!(!ptr.is_null(), "an error message should be recorded");
    unsafe { CStr::from_ptr(ptr) }.to_str().unwrap().to_string()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(autosample_version()) };
    assert!(v.to_str().unwrap().starts_with("autosample "));
}

#[test]
fn full_pipeline_through_the_c_surface() {
    unsafe {
        let mut ds: *mut AsDataset = ptr::null_mut();
        let status = autosample_dataset_generate(60, 120, 3, 0.3, 0.05, 7, &mut ds);
        assert_eq!(status, AsStatus::Ok);
        let (mut users, mut items, mut positives) = (0u64, 0u64, 0u64);
        assert_eq!(autosample_dataset_num_users(ds, &mut users), AsStatus::Ok);
        assert_eq!(autosample_dataset_num_items(ds, &mut items), AsStatus::Ok);
        assert_eq!(
            autosample_dataset_num_positives(ds, &mut positives),
            AsStatus::Ok
        );
        assert_eq!((users, items), (60, 120));
        assert!(positives > 500);

        let mut split: *mut AsSplit = ptr::null_mut();
        assert_eq!(autosample_split_create(ds, 11, &mut split), AsStatus::Ok);

        let mut cfg = autosample_train_config_default();
        cfg.epochs = 5;
        cfg.batch_size = 128;
        cfg.dim = 16;
        cfg.lr_w = 0.01;
        cfg.seed = 3;

        let spec = CString::new("rns").unwrap();
        let mut model: *mut AsModel = ptr::null_mut();
        let mut metrics = AsMetrics {
            k: 0,
            recall: 0.0,
            ndcg: 0.0,
            precision: 0.0,
            hit_ratio: 0.0,
            users_evaluated: 0,
        };
        let status = autosample_train_fixed(split, spec.as_ptr(), &cfg, &mut model, &mut metrics);
        assert_eq!(status, AsStatus::Ok);
        assert_eq!(metrics.k, 20);
        assert!(metrics.recall >= 0.0 && metrics.recall <= 1.0);
        assert!(metrics.users_evaluated > 0);

        // Evaluating the returned model on the test split reproduces the
        // training report.
        let mut again = metrics;
        assert_eq!(
            autosample_evaluate(model, split, 1, 20, &mut again),
            AsStatus::Ok
        );
        assert_eq!(again.recall, metrics.recall);
        assert_eq!(again.ndcg, metrics.ndcg);

        // Checkpoint round-trip.
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.ckpt").to_str().unwrap()).unwrap();
        assert_eq!(autosample_model_save(model, path.as_ptr()), AsStatus::Ok);
        let mut loaded: *mut AsModel = ptr::null_mut();
        assert_eq!(
            autosample_model_load(path.as_ptr(), &mut loaded),
            AsStatus::Ok
        );
        let mut from_disk = metrics;
        assert_eq!(
            autosample_evaluate(loaded, split, 1, 20, &mut from_disk),
            AsStatus::Ok
        );
        assert_eq!(from_disk.recall, metrics.recall);

        autosample_model_free(loaded);
        autosample_model_free(model);
        autosample_split_free(split);
        autosample_dataset_free(ds);
    }
}

#[test]
fn auto_selects_and_reports() {
    unsafe {
        let mut ds: *mut AsDataset = ptr::null_mut();
        assert_eq!(
            autosample_dataset_generate(30, 60, 3, 0.4, 0.1, 5, &mut ds),
            AsStatus::Ok
        );
        let mut split: *mut AsSplit = ptr::null_mut();
        assert_eq!(autosample_split_create(ds, 2, &mut split), AsStatus::Ok);

        let mut cfg = autosample_train_config_default();
        cfg.epochs = 4;
        cfg.batch_size = 128;
        cfg.dim = 8;
        cfg.lr_w = 0.01;

        let specs = CString::new("rns,pns:beta=0.75").unwrap();
        let mut alpha = [0.0f64; 2];
        let mut selected = u64::MAX;
        let mut model: *mut AsModel = ptr::null_mut();
        let mut metrics = AsMetrics {
            k: 0,
            recall: 0.0,
            ndcg: 0.0,
            precision: 0.0,
            hit_ratio: 0.0,
            users_evaluated: 0,
        };
        let status = autosample_auto(
            split,
            specs.as_ptr(),
            &cfg,
            alpha.as_mut_ptr(),
            2,
            &mut selected,
            &mut model,
            &mut metrics,
        );
        assert_eq!(status, AsStatus::Ok);
        assert!((alpha[0] + alpha[1] - 1.0).abs() < 1e-9);
        assert!(selected < 2);
        assert!(metrics.users_evaluated > 0);

        autosample_model_free(model);
        autosample_split_free(split);
        autosample_dataset_free(ds);
    }
}

#[test]
fn error_paths_set_messages_and_codes() {
    unsafe {
        // Null output pointer.
        assert_eq!(
            autosample_dataset_generate(10, 10, 2, 0.5, 0.0, 1, ptr::null_mut()),
            AsStatus::NullArgument
        );
        assert!(last_error().contains("NULL"));

        // Bad synthetic parameters.
        let mut ds: *mut AsDataset = ptr::null_mut();
        assert_eq!(
            autosample_dataset_generate(10, 10, 3, 0.5, 0.0, 1, &mut ds),
            AsStatus::Domain
        );
        assert!(last_error().contains("num_blocks"));

        // Missing file.
        let path = CString::new("/definitely/not/here.tsv").unwrap();
        assert_eq!(
            autosample_dataset_load(path.as_ptr(), 1, &mut ds),
            AsStatus::Io
        );

        // Bad sampler spec.
        assert_eq!(
            autosample_dataset_generate(10, 20, 2, 0.6, 0.0, 1, &mut ds),
            AsStatus::Ok
        );
        let mut split: *mut AsSplit = ptr::null_mut();
        assert_eq!(autosample_split_create(ds, 1, &mut split), AsStatus::Ok);
        let cfg = autosample_train_config_default();
        let bad_spec = CString::new("srns").unwrap();
        let mut model: *mut AsModel = ptr::null_mut();
        let mut metrics = AsMetrics {
            k: 0,
            recall: 0.0,
            ndcg: 0.0,
            precision: 0.0,
            hit_ratio: 0.0,
            users_evaluated: 0,
        };
        assert_eq!(
            autosample_train_fixed(split, bad_spec.as_ptr(), &cfg, &mut model, &mut metrics),
            AsStatus::Parse
        );
        assert!(last_error().contains("sampler"));

        // Undersized alpha buffer.
        let specs = CString::new("rns,pns:beta=0.75,dns:c=4").unwrap();
        let mut alpha = [0.0f64; 2];
        let mut selected = 0u64;
        assert_eq!(
            autosample_auto(
                split,
                specs.as_ptr(),
                &cfg,
                alpha.as_mut_ptr(),
                2,
                &mut selected,
                &mut model,
                &mut metrics,
            ),
            AsStatus::Domain
        );

        autosample_split_free(split);
        autosample_dataset_free(ds);
        // Freeing NULL is a no-op.
        autosample_model_free(ptr::null_mut());
        autosample_dataset_free(ptr::null_mut());
        autosample_split_free(ptr::null_mut());
    }
}
