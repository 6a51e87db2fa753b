import { ApiClient, ClusterManifest, ClusterSummary } from "./api.js";
import { clusterRows, statusRows, summaryRows } from "./dashboard.js";
import { DEFAULT_RATE_PER_MINUTE, Flipbook } from "./flipbook.js";
import { LabelingQueue } from "./labeling.js";

const api = new ApiClient("");

const PLACEHOLDER_FRAME =
    "data:image/svg+xml," +
    encodeURIComponent(
        '<svg xmlns="http://www.w3.org/2000/svg" width="96" height="96">' +
        '<rect width="96" height="96" fill="#333"/>' +
        '<text x="48" y="52" fill="#bbb" font-size="11" text-anchor="middle">missing</text></svg>');

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

// ---------------------------------------------------------------- tabs

const views = ["dashboard", "clusters", "labeling"] as const;
type View = (typeof views)[number];

function showView(view: View): void {
    for (const name of views) {
        el(`view-${name}`).classList.toggle("hidden", name !== view);
        el(`tab-${name}`).classList.toggle("active", name === view);
    }
    if (view === "dashboard") void renderDashboard();
    if (view === "clusters") void renderClusters();
    if (view === "labeling") void renderLabeling();
}

// ------------------------------------------------------------ dashboard

let retryTimer: number | undefined;

async function renderDashboard(): Promise<void> {
    const banner = el("banner");
    try {
        const status = await api.getStatus();
        banner.classList.add("hidden");
        el("status-rows").innerHTML = statusRows(status)
            .map((r) => `<li class="${r.done ? "done" : "todo"}">` +
                `${r.done ? "✓" : "·"} ${r.step}</li>`)
            .join("");
        try {
            const report = await api.getReport();
            el("summary-rows").innerHTML = summaryRows(report)
                .map((r) => `<tr><td>${r.label}</td><td>${r.value}</td></tr>`)
                .join("");
            el("cluster-rows").innerHTML = clusterRows(report)
                .map((r) => `<tr><td>${r.cluster}</td><td>${r.size}</td><td>${r.params}</td></tr>`)
                .join("");
            el("report-block").classList.remove("hidden");
        } catch {
            el("report-block").classList.add("hidden");
        }
    } catch {
        banner.classList.remove("hidden");
        window.clearTimeout(retryTimer);
        retryTimer = window.setTimeout(() => void renderDashboard(), 3000);
    }
}

// ------------------------------------------------------------- clusters

let manifest: ClusterManifest | null = null;
let flipbook: Flipbook | null = null;
let playTimer: number | undefined;

function stopPlayback(): void {
    window.clearInterval(playTimer);
    playTimer = undefined;
    flipbook?.pause();
    el("play-btn").textContent = "play";
}

function drawFrame(): void {
    if (!flipbook) return;
    const imageId = flipbook.currentFrame;
    const img = el<HTMLImageElement>("frame");
    img.src = flipbook.isMissing(imageId) ? PLACEHOLDER_FRAME : api.imageUrl(imageId);
    img.onerror = () => {
        flipbook?.markMissing(imageId);
        img.src = PLACEHOLDER_FRAME;
    };
    const mark = flipbook.isEmphasized(flipbook.currentIndex) ? " ★" : "";
    el("frame-caption").textContent =
        `${imageId}${mark}  (${flipbook.currentIndex + 1}/${flipbook.members.length})`;
}

function selectCluster(cluster: ClusterSummary): void {
    stopPlayback();
    flipbook = new Flipbook(cluster.members, currentRate());
    const single = !flipbook.controlsEnabled;
    for (const id of ["play-btn", "prev-btn", "next-btn"]) {
        el<HTMLButtonElement>(id).disabled = single;
    }
    el("cluster-stats").innerHTML =
        `<p>cluster ${cluster.id}: ${cluster.size} member(s), medoid ${cluster.medoid}</p>` +
        `<p>high variance reduction: ${cluster.high_reduction_params.join(", ") || "none"}</p>`;
    drawFrame();
}

function currentRate(): number {
    const raw = Number(el<HTMLInputElement>("rate-input").value);
    return Number.isFinite(raw) && raw > 0 ? raw : DEFAULT_RATE_PER_MINUTE;
}

async function renderClusters(): Promise<void> {
    try {
        manifest = await api.getClusters();
    } catch {
        el("cluster-list").innerHTML = "<li>no clusters yet; run the cluster step</li>";
        return;
    }
    el("cluster-list").innerHTML = manifest.clusters
        .map((c) => `<li><button data-cluster="${c.id}">cluster ${c.id} (${c.size})</button></li>`)
        .join("");
    el("cluster-list").querySelectorAll("button").forEach((btn) => {
        btn.addEventListener("click", () => {
            const id = Number(btn.dataset.cluster);
            const cluster = manifest!.clusters.find((c) => c.id === id)!;
            selectCluster(cluster);
        });
    });
    if (manifest.clusters.length > 0 && !flipbook) {
        selectCluster(manifest.clusters[0]);
    }
}

function wireClusterControls(): void {
    el("play-btn").addEventListener("click", () => {
        if (!flipbook) return;
        if (flipbook.playing) {
            stopPlayback();
            return;
        }
        flipbook.togglePlay();
        el("play-btn").textContent = "pause";
        playTimer = window.setInterval(() => {
            flipbook?.tick();
            drawFrame();
        }, flipbook.periodMs);
    });
    el("prev-btn").addEventListener("click", () => {
        stopPlayback();
        flipbook?.step(-1);
        drawFrame();
    });
    el("next-btn").addEventListener("click", () => {
        stopPlayback();
        flipbook?.step(1);
        drawFrame();
    });
    el<HTMLInputElement>("rate-input").addEventListener("change", (ev) => {
        const input = ev.target as HTMLInputElement;
        const value = Number(input.value);
        if (!flipbook) return;
        if (!flipbook.setRate(value)) {
            input.value = String(flipbook.ratePerMinute);  // rejected, unchanged
            return;
        }
        if (flipbook.playing) {
            stopPlayback();
            el("play-btn").click();
        }
    });
}

// ------------------------------------------------------------- labeling

let queue: LabelingQueue | null = null;

async function renderLabeling(): Promise<void> {
    try {
        const unsafe = await api.getUnsafe();
        queue = new LabelingQueue(unsafe.entries);
    } catch {
        el("labeling-body").classList.add("hidden");
        el("labeling-empty").textContent = "no unsafe set yet; run the assign step";
        el("labeling-empty").classList.remove("hidden");
        return;
    }
    drawLabeling();
}

function drawLabeling(): void {
    if (!queue) return;
    const { labeled, total } = queue.progress;
    el("label-progress").textContent = `${labeled} / ${total} labeled`;
    const entry = queue.current;
    if (entry === null) {
        el("labeling-body").classList.add("hidden");
        el("labeling-empty").textContent = total === 0
            ? "unsafe set is empty"
            : "all entries labeled — ready to retrain (rccdbg retrain)";
        el("labeling-empty").classList.remove("hidden");
        return;
    }
    el("labeling-empty").classList.add("hidden");
    el("labeling-body").classList.remove("hidden");
    el<HTMLImageElement>("label-image").src = api.imageUrl(entry.image_id);
    el("label-meta").textContent =
        `${entry.image_id} — cluster ${entry.cluster}, distance ${entry.distance.toFixed(4)}`;
    const context = queue.clusterContext(entry)
        .map((e) => `<img src="${api.imageUrl(e.image_id)}" title="${e.image_id}">`)
        .join("");
    el("label-context").innerHTML = context || "<span>no other members</span>";
    el("label-error").classList.add("hidden");
}

function wireLabelingControls(): void {
    el("label-submit").addEventListener("click", async () => {
        if (!queue || queue.inFlight) return;
        const label = el<HTMLInputElement>("label-input").value.trim();
        if (!label) return;
        const ok = await queue.submit(label, api);
        if (ok) {
            el<HTMLInputElement>("label-input").value = "";
            drawLabeling();
        } else {
            const err = el("label-error");
            err.textContent = "submission failed — check the server and retry";
            err.classList.remove("hidden");
            queue.discardDraft();
        }
    });
}

// ----------------------------------------------------------------- boot

function boot(): void {
    for (const name of views) {
        el(`tab-${name}`).addEventListener("click", () => showView(name));
    }
    el<HTMLInputElement>("rate-input").value = String(DEFAULT_RATE_PER_MINUTE);
    wireClusterControls();
    wireLabelingControls();
    showView("dashboard");
}

document.addEventListener("DOMContentLoaded", boot);
