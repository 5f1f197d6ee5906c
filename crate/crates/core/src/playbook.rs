//! The golden tool-call sequence that solves a competition end to end.

use serde_json::json;

use crate::message::ToolCall;

/// What the playbook needs to know about a competition.
#[derive(Clone, Debug)]
pub struct PlaybookSpec {
    /// Paths exactly as the prompt states them.
    pub train_path: String,
    pub test_path: String,
    pub submission_path: String,
    pub target: String,
    pub id_column: String,
    pub classification: bool,
    /// Non-target text or category columns left after dropping the id.
    pub categorical: Vec<String>,
}

pub fn golden_playbook(spec: &PlaybookSpec) -> Vec<ToolCall> {
    let step = |tool: &str| ToolCall::new(tool, "");
    let mut steps = vec![
        step("read_data").kwarg("filepath", spec.train_path.as_str()).output("train_df"),
        step("read_data").kwarg("filepath", spec.test_path.as_str()).output("test_df"),
        step("concatenate_train_test").bind("train_df", "train_df").bind("test_df", "test_df").output("combined_df"),
        step("get_missing_summary").bind("df", "combined_df"),
        step("fillna_with_median").bind("df", "combined_df"),
        step("fillna_with_mode").bind("df", "combined_df"),
        step("drop_feature").bind("df", "combined_df").kwarg("column", spec.id_column.as_str()),
    ];
    if !spec.categorical.is_empty() {
        steps.push(
            step("one_hot_encode")
                .bind("df", "combined_df")
                .kwarg("columns", json!(spec.categorical))
                .kwarg("drop_first", true),
        );
    }
    let tune = if spec.classification { "tune_lightgbm_classifier" } else { "tune_lightgbm_regressor" };
    steps.extend([
        step("split_combined_into_train_test").bind("combined", "combined_df").output("split_result"),
        step("convert_dataframe_to_features_target")
            .bind("df", "train_df")
            .kwarg("target_column", spec.target.as_str())
            .kwarg("is_train", true)
            .output("train_features_target"),
        step("convert_dataframe_to_features_target")
            .bind("df", "test_df")
            .kwarg("target_column", spec.target.as_str())
            .kwarg("is_train", false)
            .output("test_features"),
        step(tune).bind("X_train", "X_train").bind("y_train", "Y_train").output("tuned_model"),
        step("predict_target").bind("model", "best_estimator").bind("X_data", "X_test").output("test_predictions"),
        step("save_dataframe_to_csv")
            .bind("df", "test_predictions")
            .kwarg("filepath", spec.submission_path.as_str()),
    ]);
    steps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::Registry;

    fn spec(categorical: Vec<String>) -> PlaybookSpec {
        PlaybookSpec {
            train_path: "data/x/train.csv".into(),
            test_path: "data/x/test.csv".into(),
            submission_path: "submissions/x.csv".into(),
            target: "y".into(),
            id_column: "id".into(),
            classification: true,
            categorical,
        }
    }

    #[test]
    fn steps_use_catalog_parameters() {
        let reg = Registry::with_catalog().unwrap();
        for call in golden_playbook(&spec(vec!["a".into()])) {
            let d = reg.get(&call.tool).unwrap_or_else(|| panic!("{} missing", call.tool));
            for k in call.bindings.keys().chain(call.func_kwargs.keys()) {
                assert!(d.param(k).is_some(), "{}.{k}", call.tool);
            }
        }
    }

    #[test]
    fn encoding_step_is_optional() {
        assert_eq!(golden_playbook(&spec(vec!["a".into()])).len(), 14);
        assert_eq!(golden_playbook(&spec(vec![])).len(), 13);
    }
}
