from .baselines import (GeoCBaseline, LinearModel, NeuralPredictor, VDCMModel, baseline_geoc,
                        baseline_linear, baseline_vdcm, fit_linear, fit_vdcm, geoc_velocity)
from .data import (FEEDBACK, HUMAN_EXO, LOG_COLUMNS, ROBOT_EXO, HumanSample, InteractionLog,
                   RobotSample, Sample, SequenceDataset, build_human_dataset, build_robot_dataset,
                   dataset_from_arrays, read_log, write_log)
from .evaluation import (EvalReport, FoldSplit, ModelScore, format_avg_std, geoc_factory,
                         kfold_evaluate, linear_factory, make_folds, neural_factory, sample_std,
                         vdcm_factory, velocity_errors)
from .training import (TrainConfig, TrainHistory, TrainingDiverged, batch_loss, fit_normalization,
                       predict_human, predict_robot, train_predictor)
