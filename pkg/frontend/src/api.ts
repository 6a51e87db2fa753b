// Typed client for the review API. All reads go through here; the only
// write in the whole UI is postLabel.

export interface ClusterSummary {
    id: number;
    members: string[];
    medoid: string;
    size: number;
    mean_pairwise_distance: number;
    high_reduction_params: string[];
}

export interface ClusterManifest {
    layer_index: number;
    k: number;
    weak_knee: boolean;
    chosen_wicd: number;
    clusters: ClusterSummary[];
}

export interface UnsafeEntry {
    image_id: string;
    cluster: number;
    distance: number;
    label: string | null;
}

export interface UnsafeSet {
    entries: UnsafeEntry[];
    labeled: number;
    total: number;
}

export interface ReportCluster {
    cluster: number;
    size: number;
    medoid: string;
    high_reduction_params: string[];
}

export interface Report {
    failing_images: number;
    test_images: number;
    num_clusters: number;
    best_layer: number;
    weak_knee: boolean;
    images_per_cluster: number;
    inspection_ratio_pct: number | null;
    clusters: ReportCluster[];
    has_variance_report: boolean;
}

export interface StepStatus {
    workspace: string;
    steps: Record<string, boolean>;
    best_layer: number | null;
}

export interface LabelAck {
    image_id: string;
    label: string;
    replaced: boolean;
}

export class ApiError extends Error {
    constructor(public status: number, message: string) {
        super(message);
    }
}

type FetchLike = typeof fetch;

export class ApiClient {
    constructor(private baseUrl = "", private fetchImpl: FetchLike = fetch) {}

    private async getJson<T>(path: string): Promise<T> {
        const resp = await this.fetchImpl(`${this.baseUrl}${path}`);
        if (!resp.ok) {
            throw new ApiError(resp.status, `GET ${path} -> ${resp.status}`);
        }
        return (await resp.json()) as T;
    }

    getClusters(): Promise<ClusterManifest> {
        return this.getJson("/api/clusters");
    }

    getClusterImages(id: number): Promise<{ cluster: number; images: string[] }> {
        return this.getJson(`/api/clusters/${id}/images`);
    }

    imageUrl(imageId: string): string {
        return `${this.baseUrl}/api/images/${encodeURIComponent(imageId)}`;
    }

    getReport(): Promise<Report> {
        return this.getJson("/api/report");
    }

    getUnsafe(): Promise<UnsafeSet> {
        return this.getJson("/api/unsafe");
    }

    getStatus(): Promise<StepStatus> {
        return this.getJson("/api/status");
    }

    async postLabel(imageId: string, label: string): Promise<LabelAck> {
        const resp = await this.fetchImpl(`${this.baseUrl}/api/labels`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ image_id: imageId, label }),
        });
        if (!resp.ok) {
            throw new ApiError(resp.status, `POST /api/labels -> ${resp.status}`);
        }
        return (await resp.json()) as LabelAck;
    }
}
