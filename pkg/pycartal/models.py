from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.special import softmax, log_softmax, entr

from .constants import Architecture, Mode, ARCHITECTURE_DEPTH, HIDDEN_DIM
from .exceptions import ShapeError, ParameterError, TrainingError
from .logger import logger

LayerGradients = List[Tuple[np.ndarray, np.ndarray]]


class PredictiveDistribution:
    """Per-instance class probabilities P(y | x)"""
    probabilities: np.ndarray

    def __init__(self, probabilities: np.ndarray):
        self.probabilities = probabilities

    def __len__(self):
        return len(self.probabilities)

    @property
    def labels(self) -> np.ndarray:
        # np.argmax returns the first maximum, so ties go to the lowest class index
        return np.argmax(self.probabilities, axis=1)

    @property
    def max_probability(self) -> np.ndarray:
        return np.max(self.probabilities, axis=1)

    def entropy(self) -> np.ndarray:
        """Shannon entropy in bits, zero-probability terms contribute 0"""
        return entropy_bits(self.probabilities)


class ForwardPass:
    """Intermediate values of one forward pass, kept for backpropagation"""
    layer_inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    masks: List[Optional[np.ndarray]]
    logits: np.ndarray
    distribution: PredictiveDistribution

    def __init__(self):
        self.layer_inputs = []
        self.pre_activations = []
        self.masks = []

    @property
    def hidden(self) -> np.ndarray:
        """Output of the last hidden layer (the representation when run in eval mode)"""
        return self.layer_inputs[-1]


class EpochResult:
    epoch: int
    losses: np.ndarray
    gold_probabilities: np.ndarray
    correct: np.ndarray

    def __init__(self, epoch: int, losses: np.ndarray, gold_probabilities: np.ndarray, correct: np.ndarray):
        self.epoch = epoch
        self.losses = losses
        self.gold_probabilities = gold_probabilities
        self.correct = correct

    @property
    def mean_loss(self) -> float:
        return float(np.mean(self.losses))


class MlpModel:
    """
    Dense feed-forward classifier: ReLU hidden layers with inverted dropout, softmax output.
    Weights are stored as (out, in), so layer l computes h_l = f(W_l . h_(l-1) + b_l).
    """
    input_dim: int
    num_classes: int
    architecture: Architecture
    hidden_dim: int
    hidden_layers: int
    dropout: float
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __init__(
            self,
            input_dim: int,
            num_classes: int,
            rng: np.random.Generator,
            architecture: Architecture = Architecture.main,
            hidden_dim: int = HIDDEN_DIM,
            hidden_layers: Optional[int] = None,
            dropout: float = 0.3
    ):
        if num_classes < 2:
            raise ParameterError(f'A classifier needs at least 2 classes, got {num_classes}')
        if not 0.0 <= dropout < 1.0:
            raise ParameterError(f'Dropout probability must be in [0, 1), got {dropout}')

        self.input_dim = input_dim
        self.num_classes = num_classes
        self.architecture = architecture
        self.hidden_dim = hidden_dim
        self.hidden_layers = hidden_layers if hidden_layers is not None else ARCHITECTURE_DEPTH[architecture]
        self.dropout = dropout
        self.reset_parameters(rng)

    def layer_sizes(self) -> List[int]:
        return [self.input_dim] + [self.hidden_dim] * self.hidden_layers + [self.num_classes]

    def reset_parameters(self, rng: np.random.Generator) -> None:
        """
        Re-initialize all weights (uniform, fan-in scaled for ReLU) and zero all biases
        :param rng: Generator to draw the weights from
        :return: None
        """
        sizes = self.layer_sizes()
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    def parameters(self) -> List[np.ndarray]:
        """All parameter arrays (by reference) in optimizer order: W_1, b_1, W_2, b_2, ..."""
        return [parameter for layer in zip(self.weights, self.biases) for parameter in layer]

    def forward(
            self,
            features: np.ndarray,
            mode: Mode = Mode.eval,
            rng: Optional[np.random.Generator] = None,
            return_hidden: bool = False
    ) -> Union[PredictiveDistribution, Tuple[PredictiveDistribution, np.ndarray]]:
        forward_pass = self.propagate(features, mode, rng)
        if return_hidden:
            return forward_pass.distribution, forward_pass.hidden
        return forward_pass.distribution

    def predict(self, features: np.ndarray) -> PredictiveDistribution:
        return self.propagate(features, Mode.eval).distribution

    def representation(self, features: np.ndarray) -> np.ndarray:
        """Eval-mode activations of the last hidden layer"""
        return self.propagate(features, Mode.eval).hidden

    def propagate(self, features: np.ndarray, mode: Mode, rng: Optional[np.random.Generator] = None) -> ForwardPass:
        activation = np.asarray(features, dtype=np.float64)
        if activation.ndim == 1:
            activation = activation.reshape(1, -1)

        apply_dropout = mode is Mode.train and self.dropout > 0.0
        if apply_dropout and rng is None:
            raise ParameterError('Forward pass in train mode requires an RNG for dropout masks')

        forward_pass = ForwardPass()
        last = len(self.weights) - 1
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            if activation.ndim != 2 or activation.shape[1] != weight.shape[1]:
                raise ShapeError(f'Layer {index} expects {weight.shape[1]} inputs, '
                                 f'got input of shape {activation.shape}')

            forward_pass.layer_inputs.append(activation)
            pre_activation = activation @ weight.T + bias
            if index == last:
                forward_pass.logits = pre_activation
                break

            activation = np.maximum(pre_activation, 0.0)
            mask = None
            if apply_dropout:
                # Inverted dropout: scale kept units at train time so eval needs no rescaling
                mask = (rng.random(activation.shape) >= self.dropout) / (1.0 - self.dropout)
                activation = activation * mask
            forward_pass.pre_activations.append(pre_activation)
            forward_pass.masks.append(mask)

        forward_pass.distribution = PredictiveDistribution(softmax(forward_pass.logits, axis=1))
        return forward_pass

    def loss_and_gradients(
            self,
            features: np.ndarray,
            labels: np.ndarray,
            mode: Mode = Mode.eval,
            rng: Optional[np.random.Generator] = None
    ) -> Tuple[float, LayerGradients]:
        """
        Mean cross-entropy of the batch and its gradients with respect to every (W_l, b_l)
        """
        labels = self.check_labels(labels)
        forward_pass = self.propagate(features, mode, rng)
        size = len(labels)
        if forward_pass.logits.shape[0] != size:
            raise ShapeError(f'Got {forward_pass.logits.shape[0]} feature rows but {size} labels')

        rows = np.arange(size)
        loss = -float(np.mean(log_softmax(forward_pass.logits, axis=1)[rows, labels]))

        delta = forward_pass.distribution.probabilities.copy()
        delta[rows, labels] -= 1.0
        delta /= size

        gradients: LayerGradients = [None] * len(self.weights)
        for index in reversed(range(len(self.weights))):
            gradients[index] = (delta.T @ forward_pass.layer_inputs[index], delta.sum(axis=0))
            if index == 0:
                break

            delta = delta @ self.weights[index]
            mask = forward_pass.masks[index - 1]
            if mask is not None:
                delta = delta * mask
            delta = delta * (forward_pass.pre_activations[index - 1] > 0.0)

        return loss, gradients

    def train_epoch(
            self,
            optimizer: 'AdamWState',
            features: np.ndarray,
            labels: np.ndarray,
            batch_size: int,
            rng: np.random.Generator,
            epoch: int = 0
    ) -> EpochResult:
        """
        One pass over the training set in a seeded shuffle order, followed by a deterministic eval-mode pass
        recording the gold-label probability and correctness of every training instance
        """
        features = np.asarray(features, dtype=np.float64)
        labels = self.check_labels(labels)
        size = len(labels)
        if size == 0:
            raise TrainingError('Cannot train on an empty training set')
        if batch_size < 1:
            raise ParameterError(f'Batch size must be positive, got {batch_size}')

        order = rng.permutation(size)
        losses = []
        for batch_index, start in enumerate(range(0, size, batch_size)):
            batch = order[start:start + batch_size]
            loss, gradients = self.loss_and_gradients(features[batch], labels[batch], Mode.train, rng)
            if not np.isfinite(loss):
                raise TrainingError(f'Non-finite loss ({loss}) at epoch {epoch}, batch {batch_index}')

            optimizer.step(self.parameters(), flatten_gradients(gradients))
            losses.append(loss)

        distribution = self.predict(features)
        gold_probabilities = distribution.probabilities[np.arange(size), labels]
        correct = distribution.labels == labels

        result = EpochResult(epoch, np.asarray(losses), gold_probabilities, correct)
        logger.debug(f'Epoch {epoch}: mean loss {result.mean_loss:.6f}, train accuracy {np.mean(correct):.4f}')

        return result

    def mc_dropout_passes(self, features: np.ndarray, passes: int, rng: np.random.Generator) -> np.ndarray:
        """
        Stochastic forward passes with dropout active
        :return: Array of shape (passes, instances, classes)
        """
        if passes < 1:
            raise ParameterError(f'Monte Carlo dropout needs at least one pass, got {passes}')

        return np.stack([self.forward(features, Mode.train, rng).probabilities for _ in range(passes)])

    def mc_dropout_predict(self, features: np.ndarray, passes: int, rng: np.random.Generator) -> PredictiveDistribution:
        if passes < 1:
            raise ParameterError(f'Monte Carlo dropout needs at least one pass, got {passes}')

        # Without dropout every pass is the deterministic forward pass
        if self.dropout == 0.0:
            return self.predict(features)

        return PredictiveDistribution(np.mean(self.mc_dropout_passes(features, passes, rng), axis=0))

    def check_labels(self, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size > 0 and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ParameterError(f'Labels must be in [0, {self.num_classes}), '
                                 f'got range [{labels.min()}, {labels.max()}]')

        return labels


class AdamWState:
    """
    AdamW optimizer state with decoupled weight decay: p <- p - lr * (lambda * p + m_hat / (sqrt(v_hat) + eps))
    """
    learning_rate: float
    beta1: float
    beta2: float
    epsilon: float
    weight_decay: float
    first_moments: List[np.ndarray]
    second_moments: List[np.ndarray]
    step_count: int

    def __init__(
            self,
            model: MlpModel,
            learning_rate: float = 1e-4,
            beta1: float = 0.9,
            beta2: float = 0.999,
            epsilon: float = 1e-8,
            weight_decay: float = 0.01
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.weight_decay = weight_decay
        self.reset(model)

    def reset(self, model: MlpModel) -> None:
        self.first_moments = [np.zeros_like(parameter) for parameter in model.parameters()]
        self.second_moments = [np.zeros_like(parameter) for parameter in model.parameters()]
        self.step_count = 0

    def step(self, parameters: List[np.ndarray], gradients: List[np.ndarray]) -> None:
        """
        Update the given parameters in place
        :param parameters: Parameter arrays, in the same order the state was created for
        :param gradients: Gradients, one per parameter array
        :return: None
        """
        if len(parameters) != len(self.first_moments) or len(gradients) != len(parameters):
            raise ShapeError(f'Optimizer tracks {len(self.first_moments)} parameters, '
                             f'got {len(parameters)} parameters and {len(gradients)} gradients')

        self.step_count += 1
        first_correction = 1.0 - self.beta1 ** self.step_count
        second_correction = 1.0 - self.beta2 ** self.step_count
        for index, (parameter, gradient, m, v) in enumerate(
                zip(parameters, gradients, self.first_moments, self.second_moments)):
            if parameter.shape != gradient.shape or parameter.shape != m.shape:
                raise ShapeError(f'Shape mismatch for parameter {index}: parameter {parameter.shape}, '
                                 f'gradient {gradient.shape}, state {m.shape}')

            parameter *= 1.0 - self.learning_rate * self.weight_decay
            m *= self.beta1
            m += (1.0 - self.beta1) * gradient
            v *= self.beta2
            v += (1.0 - self.beta2) * gradient * gradient
            parameter -= self.learning_rate * (m / first_correction) / (np.sqrt(v / second_correction) + self.epsilon)


def entropy_bits(probabilities: np.ndarray) -> np.ndarray:
    return np.sum(entr(probabilities), axis=-1) / np.log(2.0)


def flatten_gradients(gradients: LayerGradients) -> List[np.ndarray]:
    return [gradient for layer in gradients for gradient in layer]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / (||a|| + ||n||), 0 when both are zero"""
    denominator = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denominator == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denominator)
