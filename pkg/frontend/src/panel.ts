/** Dialog console and status panel: transcript, question box, "Celia"
 * attention button with its visible countdown, alerts, connection banner. */

import type { ApiClient } from "./api.js";
import type { SceneStore } from "./store.js";

export class DialogPanel {
  private transcriptEl: HTMLElement;
  private alertsEl: HTMLElement;
  private bannerEl: HTMLElement;
  private countdownEl: HTMLElement;
  private inputEl: HTMLInputElement;
  private askBtn: HTMLButtonElement;
  private celiaBtn: HTMLButtonElement;
  private speakerEl: HTMLSelectElement;
  private renderedTranscript = 0;

  constructor(root: HTMLElement, private store: SceneStore, private api: ApiClient) {
    this.transcriptEl = root.querySelector("#transcript")!;
    this.alertsEl = root.querySelector("#alerts")!;
    this.bannerEl = root.querySelector("#banner")!;
    this.countdownEl = root.querySelector("#countdown")!;
    this.inputEl = root.querySelector("#question")!;
    this.askBtn = root.querySelector("#ask")!;
    this.celiaBtn = root.querySelector("#celia")!;
    this.speakerEl = root.querySelector("#speaker")!;

    this.askBtn.addEventListener("click", () => this.ask());
    this.inputEl.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter") this.ask();
    });
    this.inputEl.addEventListener("input", () => this.refreshControls());
    this.celiaBtn.addEventListener("click", () => {
      this.api.fireKeyword(this.store.selectedSpeaker).catch(() => undefined);
    });
    store.subscribe(() => this.render());
    this.render();
  }

  private async ask(): Promise<void> {
    const text = this.inputEl.value.trim();
    if (!text) return;
    this.inputEl.value = "";
    try {
      const resp = await this.api.query(text, this.store.selectedSpeaker);
      if (resp.answered) {
        this.store.highlight(resp.relations_used);
      } else {
        this.flashHint("not listening: say or press Celia first");
      }
    } catch {
      this.flashHint("query failed: is the service reachable?");
    }
    this.refreshControls();
  }

  private flashHint(text: string): void {
    const hint = document.createElement("div");
    hint.className = "hint";
    hint.textContent = text;
    this.transcriptEl.appendChild(hint);
    this.transcriptEl.scrollTop = this.transcriptEl.scrollHeight;
  }

  private refreshControls(): void {
    this.askBtn.disabled = this.inputEl.value.trim().length === 0;
  }

  render(): void {
    this.bannerEl.classList.toggle("hidden", this.store.connected);

    // transcript in server order, appended incrementally
    for (; this.renderedTranscript < this.store.transcript.length; this.renderedTranscript++) {
      const e = this.store.transcript[this.renderedTranscript];
      const q = document.createElement("div");
      q.className = "line question";
      q.textContent = `${e.speaker ?? "?"}: ${e.question ?? ""}`;
      const a = document.createElement("div");
      a.className = "line answer";
      a.textContent = e.answer;
      this.transcriptEl.append(q, a);
    }
    this.transcriptEl.scrollTop = this.transcriptEl.scrollHeight;

    const remaining = this.store.countdownRemaining();
    if (remaining === null) {
      this.countdownEl.textContent = "";
      this.celiaBtn.classList.remove("listening");
    } else {
      this.countdownEl.textContent = `listening ${remaining.toFixed(1)}s`;
      this.celiaBtn.classList.add("listening");
    }

    this.alertsEl.replaceChildren(
      ...this.store.alerts.map((al) => {
        const el = document.createElement("div");
        el.className = `alert ${al.kind}`;
        el.textContent = `${al.kind}: ${al.label} (expected in ${al.region})`;
        return el;
      }),
    );

    const speakers = this.store.entities.filter((e) => e.kind === "person" && e.state !== "lost");
    const current = this.store.selectedSpeaker;
    this.speakerEl.replaceChildren(
      ...speakers.map((p) => {
        const opt = document.createElement("option");
        opt.value = p.source_id ?? p.id;
        opt.textContent = p.label ?? p.id;
        opt.selected = opt.value === current;
        return opt;
      }),
    );
    this.speakerEl.onchange = () => {
      this.store.selectedSpeaker = this.speakerEl.value;
    };
    this.refreshControls();
  }
}
