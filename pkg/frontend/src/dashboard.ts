// Dashboard rows are rendered verbatim from API responses; the client never
// recomputes server numbers.

import { Report, StepStatus } from "./api.js";

export const STEP_ORDER = ["test", "heatmaps", "cluster", "assign", "retrain", "report"];

export interface StatusRow {
    step: string;
    done: boolean;
}

export function statusRows(status: StepStatus): StatusRow[] {
    return STEP_ORDER.map((step) => ({ step, done: status.steps[step] === true }));
}

export interface SummaryRow {
    label: string;
    value: string;
}

export function summaryRows(report: Report): SummaryRow[] {
    const rows: SummaryRow[] = [
        { label: "failing images", value: `${report.failing_images} / ${report.test_images}` },
        {
            label: "root cause clusters",
            value: `${report.num_clusters} (layer ${report.best_layer}` +
                `${report.weak_knee ? ", weak knee" : ""})`,
        },
    ];
    if (report.inspection_ratio_pct !== null) {
        rows.push({
            label: "inspection ratio",
            value: `${report.inspection_ratio_pct.toFixed(2)}% ` +
                `(${report.images_per_cluster} images per cluster)`,
        });
    }
    return rows;
}

export interface ClusterRow {
    cluster: number;
    size: number;
    params: string;
}

export function clusterRows(report: Report): ClusterRow[] {
    return report.clusters.map((c) => ({
        cluster: c.cluster,
        size: c.size,
        params: c.high_reduction_params.length ? c.high_reduction_params.join(", ") : "none",
    }));
}
