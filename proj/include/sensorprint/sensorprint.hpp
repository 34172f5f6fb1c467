#pragma once

#include "sensorprint/rng.hpp"
#include "sensorprint/sensor_types.hpp"
#include "sensorprint/audio_fingerprint.hpp"
#include "sensorprint/accel_fingerprint.hpp"
#include "sensorprint/device_model.hpp"
#include "sensorprint/classification.hpp"
#include "sensorprint/entropy_analysis.hpp"
#include "sensorprint/dataset.hpp"
#include "sensorprint/experiment.hpp"
