use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The ten ordered workflow stages. Shaped rewards fire in this order and the
/// hierarchical planner uses them as subtasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StageId {
    #[serde(rename = "train_data_loading")]
    TrainDataLoading,
    #[serde(rename = "test_data_loading")]
    TestDataLoading,
    #[serde(rename = "combine_train_test")]
    CombineTrainTest,
    #[serde(rename = "data_cleaning")]
    DataCleaning,
    #[serde(rename = "feature_engineering")]
    FeatureEngineering,
    #[serde(rename = "split_train_test")]
    SplitTrainTest,
    #[serde(rename = "train_data_to_features_target")]
    TrainFeaturesTarget,
    #[serde(rename = "test_data_to_features")]
    TestFeatures,
    #[serde(rename = "modeling")]
    Modeling,
    #[serde(rename = "create_submission_dataframe")]
    CreateSubmission,
}

impl StageId {
    pub const ALL: [StageId; 10] = [
        StageId::TrainDataLoading,
        StageId::TestDataLoading,
        StageId::CombineTrainTest,
        StageId::DataCleaning,
        StageId::FeatureEngineering,
        StageId::SplitTrainTest,
        StageId::TrainFeaturesTarget,
        StageId::TestFeatures,
        StageId::Modeling,
        StageId::CreateSubmission,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<StageId> {
        StageId::ALL.get(i).copied()
    }

    /// Config and prompt key, e.g. `train_data_loading`.
    pub fn key(self) -> &'static str {
        match self {
            StageId::TrainDataLoading => "train_data_loading",
            StageId::TestDataLoading => "test_data_loading",
            StageId::CombineTrainTest => "combine_train_test",
            StageId::DataCleaning => "data_cleaning",
            StageId::FeatureEngineering => "feature_engineering",
            StageId::SplitTrainTest => "split_train_test",
            StageId::TrainFeaturesTarget => "train_data_to_features_target",
            StageId::TestFeatures => "test_data_to_features",
            StageId::Modeling => "modeling",
            StageId::CreateSubmission => "create_submission_dataframe",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            StageId::TrainDataLoading => "TrainDataLoading",
            StageId::TestDataLoading => "TestDataLoading",
            StageId::CombineTrainTest => "CombineTrainTest",
            StageId::DataCleaning => "DataCleaning",
            StageId::FeatureEngineering => "FeatureEngineering",
            StageId::SplitTrainTest => "SplitTrainTest",
            StageId::TrainFeaturesTarget => "TrainFeaturesTarget",
            StageId::TestFeatures => "TestFeatures",
            StageId::Modeling => "Modeling",
            StageId::CreateSubmission => "CreateSubmission",
        }
    }

    /// Subtask prefix used in the hierarchical planner's system prompt.
    pub fn prefix(self) -> &'static str {
        match self {
            StageId::TrainDataLoading => "You are a Data Scientist in the Data Loading stage of solving a Kaggle challenge, using only the tools available to you. This stage ends when you have loaded the train data successfully.",
            StageId::TestDataLoading => "You are a Data Scientist in the Data Loading stage of solving a Kaggle challenge, using only the tools available to you. This stage ends when you have loaded the test data successfully.",
            StageId::CombineTrainTest => "You are a Data Scientist in the Data Loading stage of solving a Kaggle challenge, using only the tools available to you. This stage ends when you have combined the train and test data into a single dataframe successfully, to be used for downstream Data Cleaning and Feature Engineering.",
            StageId::DataCleaning => "You are a Data Scientist in the Data Cleaning stage of solving a Kaggle challenge, using only the tools available to you. This stage ends when there are no missing values present in the data. This also includes the column corresponding to the target variable, that may have NaNs in the test partition since the target variable is not present in the test partition. You are allowed to be innovative in filling the missing values based on your understanding of the data.",
            StageId::FeatureEngineering => "You are a Data Scientist in the Feature Engineering stage of solving a Kaggle challenge, using only the tools available to you. Create new features, or delete unimportant features or transform existing features as needed. You are not allowed to delete or modify features that indicate if the row in the data belongs to the train or test partition. You are also not allowed to augment the feature corresponding to the target variable. Use your understanding of the data to aid your decisions. This stage ends when the models feel that the features are good enough for modeling, and categorical and numerical features have been properly encoded. After the end of this stage, all the features should be (i) either int or float or (ii) int, float, category with the number of unique values in the category columns not being exorbitantly large.",
            StageId::SplitTrainTest => "You are a Data Scientist in the Split Train Test stage of solving a Kaggle challenge, using only the tools available to you. Split the combined train and test data into train and test dataframes. This stage ends when the train and test dataframes are successfully split from the combined dataframe.",
            StageId::TrainFeaturesTarget => "You are a Data Scientist in the Converting the Train Data to Features and Target stage of solving a Kaggle challenge, using only the tools available to you. Convert the train data into features and target. This stage ends when the train data is successfully converted into features and target, for making downstream modeling upon.",
            StageId::TestFeatures => "You are a Data Scientist in the Converting the Test Data to Features stage of solving a Kaggle challenge, using only the tools available to you. Convert the test data into features. This stage ends when the test data is successfully converted into features, for making downstream predictions upon.",
            StageId::Modeling => "You are a Data Scientist in the Modeling stage of solving a Kaggle challenge, using only the tools available to you. Train and tune models. You might need to experiment with different model choices and properly tune your hyperparameters to get good performance. Use the provided evaluation tools to evaluate your trained models if needed. This stage ends when the agent has successfully created a model that it considers to be the best.",
            StageId::CreateSubmission => "You are a Data Scientist in the Create Submission stage of solving a Kaggle challenge, using only the tools available to you. Make predictions on the test data, and create a submission dataframe that contains the predictions in the requested format. This stage ends when the submission dataframe in the correct format is created.",
        }
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unknown stage '{0}'")]
pub struct UnknownStage(pub String);

impl FromStr for StageId {
    type Err = UnknownStage;

    fn from_str(s: &str) -> Result<StageId, UnknownStage> {
        StageId::ALL
            .into_iter()
            .find(|st| st.key() == s || st.display_name() == s)
            .ok_or_else(|| UnknownStage(s.to_string()))
    }
}

/// Set of stages as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct StageSet(u16);

impl StageSet {
    pub fn contains(self, s: StageId) -> bool {
        self.0 & (1 << s.index()) != 0
    }

    pub fn with(self, s: StageId) -> StageSet {
        StageSet(self.0 | (1 << s.index()))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Lowest stage not in the set.
    pub fn first_unmet(self) -> Option<StageId> {
        StageId::ALL.into_iter().find(|s| !self.contains(*s))
    }

    pub fn iter(self) -> impl Iterator<Item = StageId> {
        StageId::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_round_trip() {
        for s in StageId::ALL {
            assert_eq!(s.key().parse::<StageId>().unwrap(), s);
            assert_eq!(StageId::from_index(s.index()), Some(s));
        }
        assert!("bogus".parse::<StageId>().is_err());
    }

    #[test]
    fn stage_set_first_unmet() {
        let s = StageSet::default().with(StageId::TrainDataLoading).with(StageId::CombineTrainTest);
        assert_eq!(s.first_unmet(), Some(StageId::TestDataLoading));
        assert_eq!(s.len(), 2);
        let all = StageId::ALL.into_iter().fold(StageSet::default(), StageSet::with);
        assert_eq!(all.first_unmet(), None);
    }
}
