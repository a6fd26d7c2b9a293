#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "k3prf.h"

int main(void) {
    enum { T = 40, N = 4 };
    double x[T * N], y[T], fitted[T], pred[1];
    for (int t = 0; t < T; t++) {
        double f = sin(0.37 * t);
        for (int j = 0; j < N; j++) x[t * N + j] = f * (1 + j) + 0.1 * cos(7.0 * t + 3.0 * j);
        y[t] = 2.0 * f;
    }
    if (k3prf_abi_version() != K3PRF_ABI_VERSION) return 10;

    K3prfModel *model = NULL;
    K3prfStatus s = k3prf_fit_auto(x, T, N, y, 1, K3PRF_KERNEL_GAUSSIAN, 3.0, &model);
    if (s != K3PRF_STATUS_OK) {
        fprintf(stderr, "fit failed: %s\n", k3prf_last_error());
        return 11;
    }
    size_t n_obs = 0;
    if (k3prf_num_obs(model, &n_obs) != K3PRF_STATUS_OK || n_obs != T) return 12;
    if (k3prf_fitted_values(model, fitted, T) != K3PRF_STATUS_OK) return 13;
    if (k3prf_predict(model, x + (T - 1) * N, 1, N, pred) != K3PRF_STATUS_OK) return 14;
    if (fabs(pred[0] - fitted[T - 1]) > 1e-9) return 15;
    k3prf_model_free(model);

    s = k3prf_fit_auto(x, T, N, y, 1, K3PRF_KERNEL_GAUSSIAN, -1.0, &model);
    if (s != K3PRF_STATUS_INVALID_ARGUMENT || k3prf_last_error() == NULL) return 16;
    printf("ok %.6f\n", pred[0]);
    return 0;
}
