import { ApiClient } from "./api.js";
import { SceneCanvas } from "./canvas.js";
import { DialogPanel } from "./panel.js";
import { FrameChannel, frameChannelUrl } from "./socket.js";
import { SceneStore } from "./store.js";

const store = new SceneStore();
const api = new ApiClient("");

const canvas = document.querySelector<HTMLCanvasElement>("#scene")!;
new SceneCanvas(canvas, store, api);
new DialogPanel(document.body, store, api);

const channel = new FrameChannel(frameChannelUrl(""), {
  onMessage: (msg) => store.dispatch(msg),
  onStatus: (connected) => {
    store.setConnected(connected);
    if (connected) {
      // hydrate: the push channel sends deltas, /state is the full picture
      api.getState().then((s) => store.applyState(s)).catch(() => undefined);
    }
  },
});
channel.connect();

document.querySelector("#load-elder")?.addEventListener("click", () => {
  api.loadScenario("scenarios/elder_care.scn").catch(() => undefined);
});
document.querySelector("#load-workshop")?.addEventListener("click", () => {
  api.loadScenario("scenarios/workshop.scn").catch(() => undefined);
});
